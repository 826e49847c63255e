use serde::{Deserialize, Serialize};

use super::{ObjectPrior, PlacementSource};
use crate::data::TransitionDataset;
use crate::error::{Error, Result};
use crate::geom::{object_base, rotation_distance};
use crate::util::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggesterMetrics {
    /// Fraction of transitions where the moved object got at least `1/M`.
    pub object_accuracy: f64,
    /// Mean winner-takes-all translation error of the object's base, meters.
    pub translation_error: f64,
    /// Rotation error of the same winners, degrees.
    pub rotation_error_deg: f64,
    pub transitions: usize,
    /// Transitions with no applicable placement mode, left out of the
    /// placement errors.
    pub placement_skipped: usize,
}

/// Object-suggester accuracy against the uniform baseline and
/// winner-takes-all placement errors over `samples` suggestions each.
pub fn evaluate_suggesters(
    obj: &dyn ObjectPrior,
    plc: &dyn PlacementSource,
    heldout: &TransitionDataset,
    samples: usize,
    seed: u64,
) -> Result<SuggesterMetrics> {
    if heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    let mut t_sum = 0.0;
    let mut r_sum = 0.0;
    let mut placed = 0usize;
    let mut skipped = 0usize;
    for (i, r) in heldout.records.iter().enumerate() {
        let o = &r.observation;
        let x = r.action.object;
        let probs = obj.object_probabilities(o)?;
        let uniform = 1.0 / o.num_objects() as f64;
        let p = probs.iter().find(|(id, _)| *id == x).map_or(0.0, |(_, p)| *p);
        hits += usize::from(p >= uniform - 1e-12);

        let proposals = match plc.propose(o, x, samples, mix_seed(seed, i as u64)) {
            Ok(v) if !v.is_empty() => v,
            Ok(_) | Err(Error::NoApplicableMode(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let base = object_base(o, x)?;
        let truth = r.action.transform.apply(&base);
        let (err, rot) = proposals
            .iter()
            .map(|(t, _)| {
                (
                    (t.apply(&base) - truth).norm(),
                    rotation_distance(t, &r.action.transform),
                )
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty");
        t_sum += err;
        r_sum += rot.to_degrees();
        placed += 1;
    }
    let n = heldout.len();
    let mean = |s: f64| if placed > 0 { s / placed as f64 } else { f64::NAN };
    Ok(SuggesterMetrics {
        object_accuracy: hits as f64 / n as f64,
        translation_error: mean(t_sum),
        rotation_error_deg: mean(r_sum),
        transitions: n,
        placement_skipped: skipped,
    })
}
