use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Point3;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Provenance, Transition, TransitionDataset};
use crate::error::{Error, Result};
use crate::geom::{object_base, transform_object, Action, ObjectId, RigidTransform, SegmentedCloud};
use crate::scene::{execute_action, generate_scene, support_graph, ContactParams, SceneSpec};
use crate::util::{mix_seed, seeded_rng};

/// Class name used for the table in placement tables.
pub const TABLE: &str = "table";

/// Goal-agnostic scripted pick-and-place: repeatedly moves a random
/// unobstructed object onto the table or onto another unobstructed object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoPolicy {
    /// Per moved class, the classes (or `"table"`) it may be placed on.
    /// Classes without an entry may go anywhere.
    #[serde(default)]
    pub allowed_supports: BTreeMap<String, Vec<String>>,
    pub steps_per_scene: usize,
    pub table_x: [f64; 2],
    pub table_y: [f64; 2],
    /// Probability of stacking instead of placing on the table.
    pub stack_probability: f64,
    /// Uniform XY offset bound when stacking, meters.
    pub stack_noise: f64,
    #[serde(default)]
    pub contact: ContactParams,
}

impl DemoPolicy {
    pub fn block_stacking() -> Self {
        Self {
            allowed_supports: BTreeMap::new(),
            steps_per_scene: 4,
            table_x: [-0.25, 0.25],
            table_y: [-0.25, 0.25],
            stack_probability: 0.6,
            stack_noise: 0.003,
            contact: ContactParams::default(),
        }
    }

    pub fn table_bussing() -> Self {
        let allow = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            allowed_supports: BTreeMap::from([
                ("plate".to_string(), allow(&[TABLE, "plate"])),
                ("bowl".to_string(), allow(&[TABLE, "plate", "bowl"])),
                ("cup".to_string(), allow(&[TABLE, "plate", "bowl"])),
            ]),
            steps_per_scene: 4,
            table_x: [-0.4, 0.4],
            table_y: [-0.3, 0.3],
            stack_probability: 0.6,
            stack_noise: 0.005,
            contact: ContactParams::default(),
        }
    }

    fn allows(&self, moved: &str, support: &str) -> bool {
        self.allowed_supports
            .get(moved)
            .is_none_or(|v| v.iter().any(|s| s == support))
    }

    /// One scripted step, or `None` if no legal move exists.
    pub fn choose(&self, cloud: &SegmentedCloud, rng: &mut ChaCha8Rng) -> Option<Action> {
        let graph = support_graph(cloud, &self.contact);
        let free: Vec<ObjectId> = cloud
            .object_ids()
            .filter(|id| graph.directly_above(*id).is_empty())
            .collect();
        let boxes = cloud.bboxes();
        let mut order = free.clone();
        // try objects in random order until one has a legal placement
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for x in order {
            let class = cloud.class_of(x).ok()?;
            let anchors: Vec<ObjectId> = free
                .iter()
                .copied()
                .filter(|&y| y != x && self.allows(class, cloud.class_of(y).unwrap_or_default()))
                .collect();
            let stack = !anchors.is_empty() && rng.random_bool(self.stack_probability.clamp(0.0, 1.0));
            let yaw = rng.random_range(-PI..PI);
            let base = object_base(cloud, x).ok()?;
            let target = if stack {
                let y = *anchors.choose(rng)?;
                let by = boxes[&y];
                let [cx, cy] = by.center_xy();
                let n = self.stack_noise;
                let (dx, dy) = if n > 0.0 {
                    (rng.random_range(-n..=n), rng.random_range(-n..=n))
                } else {
                    (0.0, 0.0)
                };
                Some(Point3::new(cx + dx, cy + dy, self.contact.rest_height(Some(by.max.z))))
            } else if self.allows(class, TABLE) {
                self.free_table_spot(cloud, x, rng)
                    .map(|[tx, ty]| Point3::new(tx, ty, self.contact.rest_height(None)))
            } else {
                None
            };
            if let Some(t) = target {
                return Some(Action::new(x, RigidTransform::yaw_about(&base, yaw, &t)));
            }
        }
        None
    }

    fn free_table_spot(&self, cloud: &SegmentedCloud, x: ObjectId, rng: &mut ChaCha8Rng) -> Option<[f64; 2]> {
        let boxes = cloud.bboxes();
        let radius = |id: ObjectId| {
            let b = boxes[&id];
            0.5 * (b.max.x - b.min.x).hypot(b.max.y - b.min.y)
        };
        let rx = radius(x);
        for _ in 0..200 {
            let p = [
                rng.random_range(self.table_x[0]..=self.table_x[1]),
                rng.random_range(self.table_y[0]..=self.table_y[1]),
            ];
            let clear = boxes.iter().filter(|(id, _)| **id != x).all(|(id, b)| {
                let c = b.center_xy();
                let r = rx + radius(*id);
                (p[0] - c[0]).abs() >= r || (p[1] - c[1]).abs() >= r
            });
            if clear {
                return Some(p);
            }
        }
        None
    }
}

/// Rolls the scripted policy over seeded random scenes until `count`
/// transitions are recorded. Each record's next observation is the
/// transform-predicted cloud, so point correspondence is kept.
pub fn generate_demonstrations(
    spec: &SceneSpec,
    policy: &DemoPolicy,
    count: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let mut records = Vec::with_capacity(count);
    let mut skipped = 0usize;
    let mut scene_idx = 0u64;
    let max_scenes = (count as u64 + 10) * 20;
    while records.len() < count {
        if scene_idx >= max_scenes {
            return Err(Error::ScriptFailure(format!(
                "only {} of {count} transitions after {scene_idx} scenes",
                records.len()
            )));
        }
        let scene_seed = mix_seed(seed, scene_idx);
        scene_idx += 1;
        let mut s = spec.clone();
        s.seed = scene_seed;
        let Ok(mut cloud) = generate_scene(&s) else {
            skipped += 1;
            continue;
        };
        let mut rng = seeded_rng(mix_seed(scene_seed, 0xDE30));
        for _ in 0..policy.steps_per_scene.max(1) {
            if records.len() >= count {
                break;
            }
            let Some(action) = policy.choose(&cloud, &mut rng) else {
                skipped += 1;
                break;
            };
            let next = transform_object(&cloud, &action)?;
            let executed = execute_action(&cloud, &action, &policy.contact)?;
            records.push(Transition {
                observation: cloud,
                action,
                next,
            });
            cloud = executed;
        }
    }
    TransitionDataset::new(
        records,
        Provenance {
            generator: format!("scripted:{:?}", spec.task).to_lowercase(),
            seed,
            skipped,
        },
    )
}

/// Farthest-point sampling down to `n` points, keeping at least one point
/// per object. Starts from a seeded random point.
pub fn farthest_point_downsample(cloud: &SegmentedCloud, n: usize, seed: u64) -> Result<SegmentedCloud> {
    let pts = cloud.points();
    let labels = cloud.labels();
    if n >= pts.len() {
        return Ok(cloud.clone());
    }
    let mut chosen = vec![false; pts.len()];
    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut picks = Vec::with_capacity(n.max(cloud.num_objects()));
    // seed one point per object so every object survives
    let mut rng = seeded_rng(seed);
    for id in cloud.object_ids() {
        let idx: Vec<usize> = (0..pts.len()).filter(|&i| labels[i] == id).collect();
        picks.push(*idx.choose(&mut rng).expect("objects own points"));
    }
    for &p in &picks {
        chosen[p] = true;
    }
    for &p in &picks {
        for (i, q) in pts.iter().enumerate() {
            dist[i] = dist[i].min((q - pts[p]).norm_squared());
        }
    }
    while picks.len() < n {
        let next = (0..pts.len())
            .filter(|&i| !chosen[i])
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("fewer picks than points");
        chosen[next] = true;
        picks.push(next);
        for (i, q) in pts.iter().enumerate() {
            dist[i] = dist[i].min((q - pts[next]).norm_squared());
        }
    }
    let keep: Vec<usize> = (0..pts.len()).filter(|&i| chosen[i]).collect();
    SegmentedCloud::new(
        keep.iter().map(|&i| pts[i]).collect(),
        keep.iter().map(|&i| labels[i]).collect(),
        cloud.classes().clone(),
    )
}
