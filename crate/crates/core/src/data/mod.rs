//! Transition datasets, scripted demonstrations, and on-disk formats.

mod demos;
pub mod io;

use serde::{Deserialize, Serialize};

pub use demos::{farthest_point_downsample, generate_demonstrations, DemoPolicy, TABLE};

use crate::error::{Error, Result};
use crate::geom::{Action, SegmentedCloud};

/// One demonstrated step `(o, a, o')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: SegmentedCloud,
    pub action: Action,
    pub next: SegmentedCloud,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    /// Sampled scenes the scripted policy could not act on.
    #[serde(default)]
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    pub records: Vec<Transition>,
    pub provenance: Provenance,
}

impl TransitionDataset {
    pub fn new(records: Vec<Transition>, provenance: Provenance) -> Result<Self> {
        let ds = Self { records, provenance };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every record keeps labels, classes, and per-object point counts
    /// across the step, and acts on an object of its observation.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            check_transition(r).map_err(|reason| Error::CorruptRecord { line: i + 1, reason })?;
        }
        Ok(())
    }
}

pub(crate) fn check_transition(r: &Transition) -> std::result::Result<(), String> {
    if !r.observation.contains(r.action.object) {
        return Err(format!("action moves unknown object {}", r.action.object));
    }
    if r.observation.classes() != r.next.classes() {
        return Err("object classes change across the transition".into());
    }
    if r.observation.labels() != r.next.labels() {
        return Err("point labels or counts change across the transition".into());
    }
    Ok(())
}
