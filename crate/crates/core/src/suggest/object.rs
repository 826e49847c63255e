use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ObjectPrior;
use crate::data::TransitionDataset;
use crate::error::{Error, Result};
use crate::geom::{ObjectId, SegmentedCloud};
use crate::scene::{support_graph, ContactParams, SupportGraph};

pub const NUM_FEATURES: usize = 4;

const LEARNING_RATE: f64 = 0.5;
const ITERATIONS: usize = 3000;
const L2: f64 = 1e-3;

/// Logistic movability scorer over per-object query features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSuggesterModel {
    pub weights: [f64; NUM_FEATURES],
    pub bias: f64,
    /// Smoothed fraction of appearances in which each class was the one moved.
    pub class_prior: BTreeMap<String, f64>,
    pub temperature: f64,
    pub fitted: bool,
}

impl Default for ObjectSuggesterModel {
    fn default() -> Self {
        Self {
            weights: [0.0; NUM_FEATURES],
            bias: 0.0,
            class_prior: BTreeMap::new(),
            temperature: 1.0,
            fitted: false,
        }
    }
}

/// Query features for one object:
/// `[covered fraction, normalized height, objects resting on it, class prior]`.
///
/// The covered fraction is the share of the object's points lying under the
/// XY box of another object that starts above them.
pub fn object_features(
    cloud: &SegmentedCloud,
    id: ObjectId,
    graph: &SupportGraph,
    class_prior: &BTreeMap<String, f64>,
) -> Result<[f64; NUM_FEATURES]> {
    cloud.ensure(id)?;
    let boxes = cloud.bboxes();
    let others: Vec<_> = boxes.iter().filter(|(o, _)| **o != id).map(|(_, b)| *b).collect();
    let mut total = 0usize;
    let mut covered = 0usize;
    for p in cloud.object_points(id) {
        total += 1;
        let hit = others
            .iter()
            .any(|b| b.min.z > p.z && p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y);
        covered += usize::from(hit);
    }
    let scene_top = cloud.points().iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let own_top = boxes[&id].max.z;
    let height = if scene_top > 0.0 { own_top / scene_top } else { 0.0 };
    let degree = graph.directly_above(id).len() as f64;
    let prior = class_prior.get(cloud.class_of(id)?).copied().unwrap_or(0.5);
    Ok([covered as f64 / total as f64, height, degree, prior])
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits the scorer by full-batch gradient descent on the logistic loss. Each
/// transition yields one positive query (the moved object) and one negative
/// per other object. Examples are put in canonical order first, so the result
/// does not depend on record order.
pub fn fit_object_suggester(dataset: &TransitionDataset) -> Result<ObjectSuggesterModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let contact = ContactParams::default();
    let mut appear: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in &dataset.records {
        for id in r.observation.object_ids() {
            let e = appear.entry(r.observation.class_of(id)?.to_string()).or_default();
            e.0 += 1;
            e.1 += usize::from(id == r.action.object);
        }
    }
    let class_prior: BTreeMap<String, f64> = appear
        .into_iter()
        .map(|(c, (n, moved))| (c, (moved as f64 + 1.0) / (n as f64 + 2.0)))
        .collect();

    let mut examples: Vec<([f64; NUM_FEATURES], f64)> = Vec::new();
    for r in &dataset.records {
        let graph = support_graph(&r.observation, &contact);
        for id in r.observation.object_ids() {
            let f = object_features(&r.observation, id, &graph, &class_prior)?;
            examples.push((f, if id == r.action.object { 1.0 } else { 0.0 }));
        }
    }
    examples.sort_by(|a, b| {
        let ka = a.0.iter().map(|v| v.to_bits()).chain([a.1.to_bits()]);
        let kb = b.0.iter().map(|v| v.to_bits()).chain([b.1.to_bits()]);
        ka.cmp(kb)
    });

    let n = examples.len() as f64;
    let mut w = [0.0; NUM_FEATURES];
    let mut b = 0.0;
    for _ in 0..ITERATIONS {
        let mut gw = [0.0; NUM_FEATURES];
        let mut gb = 0.0;
        for (f, y) in &examples {
            let z = b + w.iter().zip(f).map(|(a, x)| a * x).sum::<f64>();
            let err = sigmoid(z) - y;
            for j in 0..NUM_FEATURES {
                gw[j] += err * f[j];
            }
            gb += err;
        }
        for j in 0..NUM_FEATURES {
            w[j] -= LEARNING_RATE * (gw[j] / n + L2 * w[j]);
        }
        b -= LEARNING_RATE * gb / n;
    }
    Ok(ObjectSuggesterModel {
        weights: w,
        bias: b,
        class_prior,
        temperature: 1.0,
        fitted: true,
    })
}

impl ObjectSuggesterModel {
    /// Raw score (logit) for each object, in ascending id order.
    pub fn scores(&self, cloud: &SegmentedCloud) -> Result<Vec<(ObjectId, f64)>> {
        if !self.fitted {
            return Err(Error::UnfittedModel);
        }
        let graph = support_graph(cloud, &ContactParams::default());
        cloud
            .object_ids()
            .map(|id| {
                let f = object_features(cloud, id, &graph, &self.class_prior)?;
                Ok((
                    id,
                    self.bias + self.weights.iter().zip(&f).map(|(a, x)| a * x).sum::<f64>(),
                ))
            })
            .collect()
    }
}

/// Softmax over raw scores with the given temperature.
pub fn softmax(scores: &[(ObjectId, f64)], temperature: f64) -> Vec<(ObjectId, f64)> {
    let t = if temperature > 0.0 { temperature } else { 1.0 };
    let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|(_, s)| ((s - max) / t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    scores.iter().zip(exps).map(|((id, _), e)| (*id, e / sum)).collect()
}

/// One query per object, normalized with a softmax over the M scores.
pub fn suggest_objects(model: &ObjectSuggesterModel, cloud: &SegmentedCloud) -> Result<Vec<(ObjectId, f64)>> {
    Ok(softmax(&model.scores(cloud)?, model.temperature))
}

impl ObjectPrior for ObjectSuggesterModel {
    fn object_probabilities(&self, cloud: &SegmentedCloud) -> Result<Vec<(ObjectId, f64)>> {
        suggest_objects(self, cloud)
    }
}

/// `1/M` for every object.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformObjects;

impl ObjectPrior for UniformObjects {
    fn object_probabilities(&self, cloud: &SegmentedCloud) -> Result<Vec<(ObjectId, f64)>> {
        let m = cloud.num_objects() as f64;
        Ok(cloud.object_ids().map(|id| (id, 1.0 / m)).collect())
    }
}
