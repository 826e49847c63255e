//! Model deviation estimation: how far execution will stray from the
//! planner's kinematic prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{object_chamfer, transform_object, voxel_overlap, Action, SegmentedCloud, DEFAULT_VOXEL_SIZE};
use crate::scene::{execute_action, support_graph, ContactParams, TaskKind};
use crate::suggest::PlacementSource;
use crate::util::mix_seed;

pub const NUM_FEATURES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdeConfig {
    pub epsilon: f64,
    pub clip_max: f64,
    /// Neighbors averaged per prediction.
    pub neighbors: usize,
}

impl MdeConfig {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::BlockStacking => Self {
                epsilon: 1.0,
                clip_max: 3.2,
                neighbors: 5,
            },
            TaskKind::TableBussing => Self {
                epsilon: 0.01,
                clip_max: 5000.0,
                neighbors: 5,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.clip_max > 0.0) || self.neighbors == 0 {
            return Err(Error::InvalidSpec(format!("bad MDE config {self:?}")));
        }
        Ok(())
    }
}

/// Sum over objects of `(CD(expected, observed) + eps) / (CD(expected, initial) + eps)`.
pub fn deviation_label(
    expected: &SegmentedCloud,
    observed: &SegmentedCloud,
    initial: &SegmentedCloud,
    epsilon: f64,
) -> Result<f64> {
    if !expected.same_layout(observed) || !expected.same_layout(initial) {
        return Err(Error::MismatchedObjects(
            "clouds differ in objects or point counts".into(),
        ));
    }
    let mut sum = 0.0;
    for id in expected.object_ids() {
        let num = object_chamfer(expected, observed, id)? + epsilon;
        let den = object_chamfer(expected, initial, id)? + epsilon;
        sum += num / den;
    }
    Ok(sum)
}

/// `[transitive dependents of the moved object, voxel overlap at the
/// planned pose, translation norm, rotation angle]`.
pub fn transition_features(
    cloud: &SegmentedCloud,
    action: &Action,
    contact: &ContactParams,
) -> Result<[f64; NUM_FEATURES]> {
    let graph = support_graph(cloud, contact);
    let expected = transform_object(cloud, action)?;
    Ok([
        graph.dependents(action.object).len() as f64,
        voxel_overlap(&expected, action.object, DEFAULT_VOXEL_SIZE)?,
        action.transform.translation().norm(),
        action.transform.rotation_angle(),
    ])
}

/// Clips at `clip_max`, then maps `[min, max]` onto `[0, 1]`. A degenerate
/// range maps everything to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub clip_max: f64,
    pub min: f64,
    pub max: f64,
}

impl LabelScaler {
    pub fn fit(raw: &[f64], clip_max: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let clipped = raw.iter().map(|r| r.min(clip_max));
        let (min, max) = clipped.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(Self { clip_max, min, max })
    }

    pub fn scale(&self, raw: f64) -> f64 {
        let range = self.max - self.min;
        if !(range > 0.0) {
            return 0.0;
        }
        ((raw.min(self.clip_max) - self.min) / range).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdeExample {
    pub features: [f64; NUM_FEATURES],
    pub raw_label: f64,
    pub label: f64,
}

/// Distance-weighted k-nearest-neighbor estimator over standardized
/// transition features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdeModel {
    pub config: MdeConfig,
    pub contact: ContactParams,
    pub scaler: LabelScaler,
    pub feature_scale: [f64; NUM_FEATURES],
    pub examples: Vec<MdeExample>,
}

/// Labels each `(cloud, action)` by executing it in the kinematic scene and
/// comparing against the planner's expectation.
pub fn label_transitions(
    transitions: &[(SegmentedCloud, Action)],
    contact: &ContactParams,
    epsilon: f64,
) -> Result<Vec<([f64; NUM_FEATURES], f64)>> {
    transitions
        .iter()
        .map(|(cloud, action)| {
            let expected = transform_object(cloud, action)?;
            let observed = execute_action(cloud, action, contact)?;
            let label = deviation_label(&expected, &observed, cloud, epsilon)?;
            Ok((transition_features(cloud, action, contact)?, label))
        })
        .collect()
}

pub fn fit_mde(
    transitions: &[(SegmentedCloud, Action)],
    contact: &ContactParams,
    config: MdeConfig,
) -> Result<MdeModel> {
    if transitions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    fit_mde_labeled(
        label_transitions(transitions, contact, config.epsilon)?,
        *contact,
        config,
    )
}

/// Fits from already-labeled features.
pub fn fit_mde_labeled(
    labeled: Vec<([f64; NUM_FEATURES], f64)>,
    contact: ContactParams,
    config: MdeConfig,
) -> Result<MdeModel> {
    config.validate()?;
    let raw: Vec<f64> = labeled.iter().map(|(_, l)| *l).collect();
    let scaler = LabelScaler::fit(&raw, config.clip_max)?;
    let n = labeled.len() as f64;
    let mut feature_scale = [1.0; NUM_FEATURES];
    for (j, s) in feature_scale.iter_mut().enumerate() {
        let mean = labeled.iter().map(|(f, _)| f[j]).sum::<f64>() / n;
        let var = labeled.iter().map(|(f, _)| (f[j] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            *s = var.sqrt();
        }
    }
    let examples = labeled
        .into_iter()
        .map(|(features, raw_label)| MdeExample {
            features,
            raw_label,
            label: scaler.scale(raw_label),
        })
        .collect();
    Ok(MdeModel {
        config,
        contact,
        scaler,
        feature_scale,
        examples,
    })
}

impl MdeModel {
    pub fn predict_features(&self, f: &[f64; NUM_FEATURES]) -> Result<f64> {
        if self.examples.is_empty() {
            return Err(Error::UnfittedModel);
        }
        let mut dists: Vec<(f64, f64)> = self
            .examples
            .iter()
            .map(|e| {
                let d2: f64 = (0..NUM_FEATURES)
                    .map(|j| ((f[j] - e.features[j]) / self.feature_scale[j]).powi(2))
                    .sum();
                (d2.sqrt(), e.label)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let exact: Vec<f64> = dists.iter().take_while(|(d, _)| *d <= 1e-12).map(|(_, l)| *l).collect();
        if !exact.is_empty() {
            return Ok((exact.iter().sum::<f64>() / exact.len() as f64).clamp(0.0, 1.0));
        }
        let near = &dists[..self.config.neighbors.min(dists.len())];
        let (num, den) = near
            .iter()
            .fold((0.0, 0.0), |(n, d), (dist, l)| (n + l / dist, d + 1.0 / dist));
        Ok((num / den).clamp(0.0, 1.0))
    }
}

/// Estimated deviation of executing `action` in `cloud`, in `[0, 1]`.
pub fn predict_deviation(model: &MdeModel, cloud: &SegmentedCloud, action: &Action) -> Result<f64> {
    model.predict_features(&transition_features(cloud, action, &model.contact)?)
}

/// `k` suggested placements per object per scene, each rolled out one step.
pub fn suggested_transitions(
    scenes: &[SegmentedCloud],
    placer: &dyn PlacementSource,
    k: usize,
    seed: u64,
) -> Result<Vec<(SegmentedCloud, Action)>> {
    let mut out = Vec::new();
    for (si, cloud) in scenes.iter().enumerate() {
        for id in cloud.object_ids() {
            let s = mix_seed(seed, ((si as u64) << 32) | u64::from(id.0));
            let proposals = match placer.propose(cloud, id, k, s) {
                Ok(p) => p,
                Err(Error::NoApplicableMode(_)) => continue,
                Err(e) => return Err(e),
            };
            out.extend(proposals.into_iter().map(|(t, _)| (cloud.clone(), Action::new(id, t))));
        }
    }
    Ok(out)
}
