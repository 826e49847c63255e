use nalgebra::{Point3, Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PlacementSource;
use crate::data::TransitionDataset;
use crate::data::TABLE;
use crate::error::{Error, Result};
use crate::geom::{object_base, ObjectId, RigidTransform, SegmentedCloud};
use crate::scene::ContactParams;
use crate::util::seeded_rng;

/// Placements closer than this (anchor frame) collapse into one mode.
pub const MODE_MERGE_RADIUS: f64 = 0.01;

/// What a placement is expressed relative to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Table,
    Object(ObjectId),
}

/// One stored placement: anchor frame to placed-object frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementMode {
    pub relative: RigidTransform,
    pub count: usize,
    /// `count` over the key total.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub moved: String,
    pub anchor: String,
    pub modes: Vec<PlacementMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSuggesterModel {
    /// Sorted by (moved, anchor).
    pub tables: Vec<ModeTable>,
    pub translation_sigma: f64,
    pub yaw_sigma_deg: f64,
    pub contact: ContactParams,
    pub fitted: bool,
}

impl Default for PlacementSuggesterModel {
    fn default() -> Self {
        Self {
            tables: Vec::new(),
            translation_sigma: 0.005,
            yaw_sigma_deg: 3.0,
            contact: ContactParams::default(),
            fitted: false,
        }
    }
}

/// A placement target in the scene with its share of the latent mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCandidate {
    /// Target position of the placed object's base.
    pub z: [f64; 3],
    pub probability: f64,
    pub anchor: Anchor,
    pub relative: RigidTransform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSample {
    pub transform: RigidTransform,
    pub probability: f64,
    pub anchor: Anchor,
    pub target: [f64; 3],
}

fn anchor_frame(cloud: &SegmentedCloud, anchor: Anchor, contact: &ContactParams) -> Result<Point3<f64>> {
    match anchor {
        Anchor::Table => Ok(Point3::new(0.0, 0.0, contact.table_z)),
        Anchor::Object(id) => {
            let bb = cloud.bbox(id)?;
            let [x, y] = bb.center_xy();
            Ok(Point3::new(x, y, bb.max.z))
        }
    }
}

/// Table if the object rests at table height, otherwise the other object
/// with the nearest XY center that lies below it.
pub fn identify_anchor(cloud: &SegmentedCloud, moved: ObjectId, contact: &ContactParams) -> Result<Anchor> {
    let bb = cloud.bbox(moved)?;
    if (bb.min.z - contact.rest_height(None)).abs() <= contact.tolerance {
        return Ok(Anchor::Table);
    }
    let c = bb.center_xy();
    let mut best: Option<(f64, ObjectId)> = None;
    for (id, other) in cloud.bboxes() {
        if id == moved || other.min.z >= bb.min.z {
            continue;
        }
        let o = other.center_xy();
        let d = (o[0] - c[0]).powi(2) + (o[1] - c[1]).powi(2);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, id));
        }
    }
    Ok(best.map_or(Anchor::Table, |(_, id)| Anchor::Object(id)))
}

fn class_name(cloud: &SegmentedCloud, anchor: Anchor) -> Result<String> {
    match anchor {
        Anchor::Table => Ok(TABLE.to_string()),
        Anchor::Object(id) => Ok(cloud.class_of(id)?.to_string()),
    }
}

/// Stores, per (moved class, anchor class), the anchor-relative pose of each
/// demonstrated placement, merging poses closer than [`MODE_MERGE_RADIUS`].
pub fn fit_placement_suggester(dataset: &TransitionDataset) -> Result<PlacementSuggesterModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = PlacementSuggesterModel::default();
    let contact = model.contact;
    for r in &dataset.records {
        let x = r.action.object;
        let anchor = identify_anchor(&r.next, x, &contact)?;
        let frame = anchor_frame(&r.next, anchor, &contact)?;
        let base = object_base(&r.observation, x)?;
        let placed = r.action.transform.apply(&base);
        let relative = RigidTransform::new(*r.action.transform.rotation(), placed - frame)?;
        let moved = r.observation.class_of(x)?.to_string();
        let anchor_class = class_name(&r.next, anchor)?;

        let pos = model
            .tables
            .iter()
            .position(|t| t.moved == moved && t.anchor == anchor_class);
        let table = match pos {
            Some(i) => &mut model.tables[i],
            None => {
                model.tables.push(ModeTable {
                    moved,
                    anchor: anchor_class,
                    modes: Vec::new(),
                });
                model.tables.last_mut().expect("just pushed")
            }
        };
        let near = table
            .modes
            .iter_mut()
            .find(|m| (m.relative.translation() - relative.translation()).norm() <= MODE_MERGE_RADIUS);
        match near {
            Some(m) => m.count += 1,
            None => table.modes.push(PlacementMode {
                relative,
                count: 1,
                weight: 0.0,
            }),
        }
    }
    for t in &mut model.tables {
        let total: usize = t.modes.iter().map(|m| m.count).sum();
        for m in &mut t.modes {
            m.weight = m.count as f64 / total as f64;
        }
    }
    model
        .tables
        .sort_by(|a, b| (&a.moved, &a.anchor).cmp(&(&b.moved, &b.anchor)));
    model.fitted = true;
    Ok(model)
}

impl PlacementSuggesterModel {
    pub fn table(&self, moved: &str, anchor: &str) -> Option<&ModeTable> {
        self.tables.iter().find(|t| t.moved == moved && t.anchor == anchor)
    }

    /// Every stored mode for the object's class instantiated against every
    /// matching anchor in the scene. Mass is proportional to mode counts;
    /// candidates with the same target are merged.
    pub fn candidates(&self, cloud: &SegmentedCloud, object: ObjectId) -> Result<Vec<LatentCandidate>> {
        if !self.fitted {
            return Err(Error::UnfittedModel);
        }
        let class = cloud.class_of(object)?;
        let mut anchors = vec![Anchor::Table];
        anchors.extend(cloud.object_ids().filter(|id| *id != object).map(Anchor::Object));

        let mut out: Vec<LatentCandidate> = Vec::new();
        for anchor in anchors {
            let Some(table) = self.table(class, &class_name(cloud, anchor)?) else {
                continue;
            };
            let frame = anchor_frame(cloud, anchor, &self.contact)?;
            for m in &table.modes {
                let z = frame + m.relative.translation();
                let z = [z.x, z.y, z.z];
                match out.iter_mut().find(|c| c.z == z) {
                    Some(c) => c.probability += m.count as f64,
                    None => out.push(LatentCandidate {
                        z,
                        probability: m.count as f64,
                        anchor,
                        relative: m.relative,
                    }),
                }
            }
        }
        if out.is_empty() {
            return Err(Error::NoApplicableMode(object));
        }
        let total: f64 = out.iter().map(|c| c.probability).sum();
        for c in &mut out {
            c.probability /= total;
        }
        Ok(out)
    }
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Multiplies each mass by its squared distance to `zs[sampled]` over the
/// largest such distance, then renormalizes. Returns `false` when no mass
/// is left.
pub fn rescore(masses: &mut [f64], zs: &[[f64; 3]], sampled: usize) -> bool {
    let d: Vec<f64> = zs.iter().map(|z| sq_dist(z, &zs[sampled])).collect();
    let max = d.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        masses.iter_mut().for_each(|m| *m = 0.0);
        return false;
    }
    for (m, di) in masses.iter_mut().zip(&d) {
        *m *= di / max;
    }
    let sum: f64 = masses.iter().sum();
    if sum <= 0.0 {
        return false;
    }
    masses.iter_mut().for_each(|m| *m /= sum);
    true
}

fn draw(masses: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = masses.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, m) in masses.iter().enumerate() {
        if *m <= 0.0 {
            continue;
        }
        last = i;
        if u < *m {
            return i;
        }
        u -= m;
    }
    last
}

/// Draws `k` candidate indices with iterative rescoring. Each drawn
/// candidate's mass becomes exactly zero, so the first `n` draws are
/// distinct; once all mass is spent the original masses are restored.
pub fn sample_without_replacement(candidates: &[LatentCandidate], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let zs: Vec<[f64; 3]> = candidates.iter().map(|c| c.z).collect();
    let initial: Vec<f64> = candidates.iter().map(|c| c.probability).collect();
    if !initial.iter().any(|m| *m > 0.0) {
        return Vec::new();
    }
    let mut masses = initial.clone();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let i = draw(&masses, rng);
        picked.push(i);
        if !rescore(&mut masses, &zs, i) {
            masses.clone_from(&initial);
        }
    }
    picked
}

/// Samples `k` placements for `object`. Each transform moves the object's
/// base onto its candidate target, rotated by the stored relative rotation,
/// with Gaussian jitter on the target XY and the yaw.
pub fn suggest_placements(
    model: &PlacementSuggesterModel,
    cloud: &SegmentedCloud,
    object: ObjectId,
    k: usize,
    seed: u64,
) -> Result<Vec<PlacementSample>> {
    if k == 0 {
        return Err(Error::InvalidSpec("k must be at least 1".into()));
    }
    let candidates = model.candidates(cloud, object)?;
    let mut rng = seeded_rng(seed);
    let picked = sample_without_replacement(&candidates, k, &mut rng);
    let base = object_base(cloud, object)?;
    let t_noise = Normal::new(0.0, model.translation_sigma.max(0.0)).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let r_noise =
        Normal::new(0.0, model.yaw_sigma_deg.max(0.0).to_radians()).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    picked
        .into_iter()
        .map(|i| {
            let c = &candidates[i];
            let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), r_noise.sample(&mut rng));
            let rot = yaw.matrix() * c.relative.rotation();
            let target = Vector3::new(
                c.z[0] + t_noise.sample(&mut rng),
                c.z[1] + t_noise.sample(&mut rng),
                c.z[2],
            );
            let transform = RigidTransform::new(rot, target - rot * base.coords)?;
            Ok(PlacementSample {
                transform,
                probability: c.probability,
                anchor: c.anchor,
                target: c.z,
            })
        })
        .collect()
}

impl PlacementSource for PlacementSuggesterModel {
    fn propose(
        &self,
        cloud: &SegmentedCloud,
        object: ObjectId,
        k: usize,
        seed: u64,
    ) -> Result<Vec<(RigidTransform, f64)>> {
        Ok(suggest_placements(self, cloud, object, k, seed)?
            .into_iter()
            .map(|s| (s.transform, s.probability))
            .collect())
    }
}
