//! Deterministic kinematic tabletop: seeded scene generation, support
//! relations, and pick-and-place execution with a drop-and-settle rule.

mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use geo::{ConvexHull, Intersects, MultiPoint, Point, Polygon};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use template::{ObjectTemplate, Shape, SURFACE_INSET};

use crate::error::{Error, Result};
use crate::geom::{transform_object, Aabb, Action, ObjectId, RigidTransform, SegmentedCloud};
use crate::util::seeded_rng;

pub const TABLE_Z: f64 = 0.0;
pub const CONTACT_TOLERANCE: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BlockStacking,
    TableBussing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub tolerance: f64,
    pub table_z: f64,
    /// Point inset of the object templates; resting objects have a point
    /// gap of twice this value.
    pub surface_inset: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            tolerance: CONTACT_TOLERANCE,
            table_z: TABLE_Z,
            surface_inset: SURFACE_INSET,
        }
    }
}

impl ContactParams {
    /// Lowest-point height of an object resting on a surface whose highest
    /// point is at `top` (or on the table when `None`).
    pub fn rest_height(&self, top: Option<f64>) -> f64 {
        match top {
            Some(t) => t + 2.0 * self.surface_inset,
            None => self.table_z + self.surface_inset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
    /// Index of the template this object rests on; `None` for the table.
    #[serde(default)]
    pub on: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Explicit {
        poses: Vec<ExplicitPose>,
    },
    Random {
        /// Template indices per stack, bottom first. Objects not listed stand
        /// alone on the table.
        #[serde(default)]
        stacks: Vec<Vec<usize>>,
        x_range: [f64; 2],
        y_range: [f64; 2],
        #[serde(default = "full_turn")]
        yaw_range: [f64; 2],
        /// Uniform XY offset bound of a stacked object from its base.
        #[serde(default)]
        stack_jitter: f64,
    },
}

fn full_turn() -> [f64; 2] {
    [-PI, PI]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub task: TaskKind,
    pub templates: Vec<ObjectTemplate>,
    pub layout: Layout,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    /// Randomized layout of a bundled family with the given stacks.
    pub fn random_family(family: &str, stacks: Vec<Vec<usize>>, seed: u64) -> Result<Self> {
        let templates = family_templates(family)?;
        let (task, x_range, y_range, stack_jitter) = if family.starts_with("block") {
            (TaskKind::BlockStacking, [-0.25, 0.25], [-0.25, 0.25], 0.004)
        } else {
            (TaskKind::TableBussing, [-0.4, 0.4], [-0.3, 0.3], 0.01)
        };
        Ok(Self {
            task,
            templates,
            layout: Layout::Random {
                stacks,
                x_range,
                y_range,
                yaw_range: full_turn(),
                stack_jitter,
            },
            seed,
        })
    }
}

/// Where a template instance sits: XY of its base, yaw, and base height.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Placement {
    x: f64,
    y: f64,
    yaw: f64,
    base_z: f64,
}

/// Bundled object sets.
pub fn family_templates(family: &str) -> Result<Vec<ObjectTemplate>> {
    let bus = |bowls: usize, plates: usize| {
        let mut v = Vec::new();
        for _ in 0..plates {
            v.push(ObjectTemplate::cylinder("plate", 0.09, 0.02));
        }
        for _ in 0..bowls {
            v.push(ObjectTemplate::cylinder("bowl", 0.06, 0.04));
        }
        v.push(ObjectTemplate::cylinder("cup", 0.035, 0.06));
        for t in &mut v {
            t.spacing = 0.015;
        }
        v
    };
    match family {
        "block_stacking_3" => Ok(vec![
            ObjectTemplate::block("block_red", 0.04),
            ObjectTemplate::block("block_green", 0.04),
            ObjectTemplate::block("block_blue", 0.04),
        ]),
        "table_bussing_2plate" => Ok(bus(1, 2)),
        "table_bussing_2bowl" => Ok(bus(2, 1)),
        other => Err(Error::InvalidSpec(format!("unknown scene family `{other}`"))),
    }
}

fn xy_separated(a: &Placement, ra: f64, b: &Placement, rb: f64) -> bool {
    let r = ra + rb;
    (a.x - b.x).abs() >= r || (a.y - b.y).abs() >= r
}

/// Samples the scene described by `spec`. Identical specs give identical
/// clouds.
pub fn generate_scene(spec: &SceneSpec) -> Result<SegmentedCloud> {
    if spec.templates.is_empty() {
        return Err(Error::InvalidSpec("no objects".into()));
    }
    for t in &spec.templates {
        t.validate()?;
    }
    let placements = match &spec.layout {
        Layout::Explicit { poses } => explicit_placements(&spec.templates, poses)?,
        Layout::Random {
            stacks,
            x_range,
            y_range,
            yaw_range,
            stack_jitter,
        } => random_placements(spec, stacks, *x_range, *y_range, *yaw_range, *stack_jitter)?,
    };
    build_cloud(&spec.templates, &placements)
}

fn build_cloud(templates: &[ObjectTemplate], placements: &[Placement]) -> Result<SegmentedCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut classes = BTreeMap::new();
    for (i, (t, p)) in templates.iter().zip(placements).enumerate() {
        let id = ObjectId(i as u32);
        classes.insert(id, t.class.clone());
        let pose = RigidTransform::from_yaw(p.yaw, Vector3::new(p.x, p.y, p.base_z));
        for q in t.canonical_cloud() {
            points.push(pose.apply(&q));
            labels.push(id);
        }
    }
    SegmentedCloud::new(points, labels, classes)
}

fn explicit_placements(templates: &[ObjectTemplate], poses: &[ExplicitPose]) -> Result<Vec<Placement>> {
    if poses.len() != templates.len() {
        return Err(Error::InvalidSpec(format!(
            "{} poses for {} objects",
            poses.len(),
            templates.len()
        )));
    }
    let n = poses.len();
    fn base_of(i: usize, poses: &[ExplicitPose], templates: &[ObjectTemplate], depth: usize) -> Result<f64> {
        if depth > poses.len() {
            return Err(Error::InvalidSpec("cyclic `on` relation".into()));
        }
        match poses[i].on {
            None => Ok(0.0),
            Some(b) if b >= poses.len() || b == i => {
                Err(Error::InvalidSpec(format!("object {i} rests on invalid index {b}")))
            }
            Some(b) => Ok(base_of(b, poses, templates, depth + 1)? + templates[b].height()),
        }
    }
    let base = (0..n)
        .map(|i| base_of(i, poses, templates, 0))
        .collect::<Result<Vec<f64>>>()?;
    let placements: Vec<Placement> = poses
        .iter()
        .zip(&base)
        .map(|(p, b)| Placement {
            x: p.x,
            y: p.y,
            yaw: p.yaw,
            base_z: *b,
        })
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if poses[i].on == poses[j].on {
                let (ri, rj) = (templates[i].footprint_radius(), templates[j].footprint_radius());
                let d = (placements[i].x - placements[j].x).hypot(placements[i].y - placements[j].y);
                if d < ri + rj {
                    return Err(Error::InvalidSpec(format!("objects {i} and {j} overlap")));
                }
            }
        }
        if poses.iter().filter(|p| p.on == Some(i)).count() > 1 {
            return Err(Error::InvalidSpec(format!("more than one object rests on {i}")));
        }
    }
    Ok(placements)
}

fn random_placements(
    spec: &SceneSpec,
    stacks: &[Vec<usize>],
    x_range: [f64; 2],
    y_range: [f64; 2],
    yaw_range: [f64; 2],
    stack_jitter: f64,
) -> Result<Vec<Placement>> {
    let n = spec.templates.len();
    if !(x_range[0] <= x_range[1] && y_range[0] <= y_range[1] && yaw_range[0] <= yaw_range[1]) {
        return Err(Error::InvalidSpec("empty sampling range".into()));
    }
    let mut seen = BTreeSet::new();
    for s in stacks {
        if s.is_empty() {
            return Err(Error::InvalidSpec("empty stack".into()));
        }
        for &i in s {
            if i >= n || !seen.insert(i) {
                return Err(Error::InvalidSpec(format!("stack index {i} invalid or repeated")));
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = stacks.to_vec();
    groups.extend((0..n).filter(|i| !seen.contains(i)).map(|i| vec![i]));

    let mut rng = seeded_rng(spec.seed);
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, r: [f64; 2]| {
        if r[0] == r[1] {
            r[0]
        } else {
            rng.random_range(r[0]..r[1])
        }
    };
    let mut out: Vec<Option<Placement>> = vec![None; n];
    let mut bases: Vec<(Placement, f64)> = Vec::new();
    for g in &groups {
        let radius = g
            .iter()
            .map(|&i| spec.templates[i].footprint_radius())
            .fold(0.0, f64::max);
        let mut chosen = None;
        for _ in 0..2000 {
            let cand = Placement {
                x: uniform(&mut rng, x_range),
                y: uniform(&mut rng, y_range),
                yaw: 0.0,
                base_z: 0.0,
            };
            if bases.iter().all(|(b, rb)| xy_separated(&cand, radius, b, *rb)) {
                chosen = Some(cand);
                break;
            }
        }
        let base = chosen.ok_or_else(|| Error::InvalidSpec("could not place all stacks without overlap".into()))?;
        bases.push((base, radius));
        let mut z = 0.0;
        for (level, &i) in g.iter().enumerate() {
            let (dx, dy) = if level == 0 || stack_jitter <= 0.0 {
                (0.0, 0.0)
            } else {
                (
                    rng.random_range(-stack_jitter..=stack_jitter),
                    rng.random_range(-stack_jitter..=stack_jitter),
                )
            };
            let yaw = uniform(&mut rng, yaw_range);
            out[i] = Some(Placement {
                x: base.x + dx,
                y: base.y + dy,
                yaw,
                base_z: z,
            });
            z += spec.templates[i].height();
        }
    }
    Ok(out
        .into_iter()
        .map(|p| p.expect("every object belongs to a group"))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Table,
    Object(ObjectId),
    /// Neither resting on an object nor on the table within tolerance.
    Unsupported,
}

/// Which object rests on which.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportGraph {
    below: BTreeMap<ObjectId, Support>,
}

impl SupportGraph {
    pub fn below(&self, id: ObjectId) -> Option<Support> {
        self.below.get(&id).copied()
    }

    /// `(above, below)` pairs in ascending order of `above`.
    pub fn edges(&self) -> impl Iterator<Item = (ObjectId, Support)> + '_ {
        self.below.iter().map(|(a, b)| (*a, *b))
    }

    pub fn contains_edge(&self, above: ObjectId, below: Support) -> bool {
        self.below.get(&above) == Some(&below)
    }

    /// Objects resting directly on `id`.
    pub fn directly_above(&self, id: ObjectId) -> Vec<ObjectId> {
        self.below
            .iter()
            .filter(|(_, b)| **b == Support::Object(id))
            .map(|(a, _)| *a)
            .collect()
    }

    /// Every object whose support chain passes through `id`.
    pub fn dependents(&self, id: ObjectId) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![id];
        while let Some(cur) = frontier.pop() {
            for a in self.directly_above(cur) {
                if out.insert(a) {
                    frontier.push(a);
                }
            }
        }
        out
    }

    pub fn all_supported(&self) -> bool {
        self.below.values().all(|b| *b != Support::Unsupported)
    }
}

/// XY footprint of an object: the convex hull of its projected points.
#[derive(Clone, Debug)]
pub struct Footprint {
    bbox: Aabb,
    hull: Polygon<f64>,
}

impl Footprint {
    fn of(cloud: &SegmentedCloud, id: ObjectId) -> Option<Footprint> {
        let bbox = cloud.bbox(id).ok()?;
        let pts: MultiPoint<f64> = cloud.object_points(id).map(|p| Point::new(p.x, p.y)).collect();
        Some(Footprint {
            bbox,
            hull: pts.convex_hull(),
        })
    }

    /// Whether the two footprints share area (touching counts).
    pub fn overlaps(&self, other: &Footprint) -> bool {
        if !self.bbox.overlaps_xy(&other.bbox) {
            return false;
        }
        if self.hull.exterior().0.len() < 4 || other.hull.exterior().0.len() < 4 {
            return true;
        }
        self.hull.intersects(&other.hull)
    }
}

pub fn footprints(cloud: &SegmentedCloud) -> BTreeMap<ObjectId, Footprint> {
    cloud
        .object_ids()
        .filter_map(|id| Footprint::of(cloud, id).map(|f| (id, f)))
        .collect()
}

/// Support relations: `A` rests on `B` when their footprints overlap, `B`
/// starts lower, and the gap from `B`'s top to `A`'s bottom matches a resting
/// contact within tolerance. The highest such `B` wins (lowest id on ties);
/// otherwise `A` is on the table if its bottom is there.
pub fn support_graph(cloud: &SegmentedCloud, params: &ContactParams) -> SupportGraph {
    let boxes = cloud.bboxes();
    let feet = footprints(cloud);
    let mut below = BTreeMap::new();
    for (&a, ba) in &boxes {
        let mut best: Option<(f64, ObjectId)> = None;
        for (&b, bb) in &boxes {
            if a == b || bb.min.z >= ba.min.z {
                continue;
            }
            let rest = params.rest_height(Some(bb.max.z));
            if (ba.min.z - rest).abs() <= params.tolerance && feet[&a].overlaps(&feet[&b]) {
                let better = match best {
                    None => true,
                    Some((top, _)) => bb.max.z > top,
                };
                if better {
                    best = Some((bb.max.z, b));
                }
            }
        }
        let s = match best {
            Some((_, b)) => Support::Object(b),
            None if (ba.min.z - params.rest_height(None)).abs() <= params.tolerance => Support::Table,
            None => Support::Unsupported,
        };
        below.insert(a, s);
    }
    SupportGraph { below }
}

/// What the settle pass did to each object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SettleReport {
    /// Objects that fell to a lower resting height.
    pub dropped: Vec<ObjectId>,
    /// Objects that interpenetrated what lies beneath and were pushed up onto it.
    pub lifted: Vec<ObjectId>,
}

impl SettleReport {
    pub fn collided(&self) -> bool {
        !self.lifted.is_empty()
    }
}

/// Settles every object, lowest first: each comes to rest on the highest
/// already-settled object whose footprint overlaps it (or the table). Objects
/// already resting within tolerance are left bit-identical.
pub fn settle(cloud: &SegmentedCloud, params: &ContactParams) -> (SegmentedCloud, SettleReport) {
    let boxes = cloud.bboxes();
    let feet = footprints(cloud);
    let mut order: Vec<(ObjectId, Aabb)> = boxes.into_iter().collect();
    order.sort_by(|(ia, a), (ib, b)| a.min.z.total_cmp(&b.min.z).then(ia.cmp(ib)));

    let mut settled: Vec<(Aabb, ObjectId)> = Vec::with_capacity(order.len());
    let mut shifts: BTreeMap<ObjectId, f64> = BTreeMap::new();
    let mut report = SettleReport::default();
    for (id, bb) in order {
        let top = settled
            .iter()
            .filter(|(_, s)| feet[s].overlaps(&feet[&id]))
            .map(|(s, _)| s.max.z)
            .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |a| a.max(z))));
        let rest = match top {
            Some(t) => params.rest_height(Some(t)).max(params.rest_height(None)),
            None => params.rest_height(None),
        };
        let dz = rest - bb.min.z;
        let mut now = bb;
        if dz.abs() > params.tolerance {
            shifts.insert(id, dz);
            now.min.z += dz;
            now.max.z += dz;
            if dz < 0.0 {
                report.dropped.push(id);
            } else {
                report.lifted.push(id);
            }
        }
        settled.push((now, id));
    }
    if shifts.is_empty() {
        return (cloud.clone(), report);
    }
    let points = cloud
        .points()
        .iter()
        .zip(cloud.labels())
        .map(|(p, l)| match shifts.get(l) {
            Some(dz) => Point3::new(p.x, p.y, p.z + dz),
            None => *p,
        })
        .collect();
    let out = SegmentedCloud::new(points, cloud.labels().to_vec(), cloud.classes().clone())
        .expect("settling preserves labels and classes");
    report.dropped.sort();
    report.lifted.sort();
    (out, report)
}

/// Executes one pick-and-place: the object is carried along the transform
/// alone, then the scene settles. Objects that were resting on it fall.
pub fn execute_action(cloud: &SegmentedCloud, action: &Action, params: &ContactParams) -> Result<SegmentedCloud> {
    Ok(execute_action_report(cloud, action, params)?.0)
}

pub fn execute_action_report(
    cloud: &SegmentedCloud,
    action: &Action,
    params: &ContactParams,
) -> Result<(SegmentedCloud, SettleReport)> {
    let moved = transform_object(cloud, action)?;
    Ok(settle(&moved, params))
}

/// Outcome of replaying a whole plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub final_cloud: SegmentedCloud,
    /// Steps whose placement had to be resolved by pushing an object up out
    /// of another one: a collision a real executor could not complete.
    pub collisions: usize,
    /// Steps where some object fell after the move.
    pub drops: usize,
}

pub fn execute_plan(cloud: &SegmentedCloud, plan: &[Action], params: &ContactParams) -> Result<Execution> {
    let mut cur = cloud.clone();
    let mut collisions = 0;
    let mut drops = 0;
    for a in plan {
        let (next, rep) = execute_action_report(&cur, a, params)?;
        collisions += usize::from(rep.collided());
        drops += usize::from(!rep.dropped.is_empty());
        cur = next;
    }
    Ok(Execution {
        final_cloud: cur,
        collisions,
        drops,
    })
}

/// Hides points of an object nested inside another one (its XY box inside
/// the container's and its bottom below the container's rim) that lie below
/// the rim plane. At least the highest point of each object survives.
pub fn occlusion_filter(cloud: &SegmentedCloud, params: &ContactParams) -> SegmentedCloud {
    let boxes = cloud.bboxes();
    let mut rim: BTreeMap<ObjectId, f64> = BTreeMap::new();
    for (&inner, bi) in &boxes {
        for (&outer, bo) in &boxes {
            let inside = inner != outer
                && bi.min.x >= bo.min.x
                && bi.max.x <= bo.max.x
                && bi.min.y >= bo.min.y
                && bi.max.y <= bo.max.y
                && bi.min.z < bo.max.z - params.tolerance
                && bi.min.z > bo.min.z;
            if inside {
                let r = rim.entry(inner).or_insert(bo.max.z);
                *r = r.max(bo.max.z);
            }
        }
    }
    if rim.is_empty() {
        return cloud.clone();
    }
    let mut keep = vec![true; cloud.points().len()];
    for (&id, &plane) in &rim {
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| cloud.labels()[i] == id).collect();
        let top = idx
            .iter()
            .copied()
            .max_by(|&a, &b| cloud.points()[a].z.total_cmp(&cloud.points()[b].z))
            .expect("objects own points");
        for i in idx {
            if i != top && cloud.points()[i].z < plane {
                keep[i] = false;
            }
        }
    }
    let (points, labels) = cloud
        .points()
        .iter()
        .zip(cloud.labels())
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((p, l), _)| (*p, *l))
        .unzip();
    SegmentedCloud::new(points, labels, cloud.classes().clone()).expect("each object keeps a point")
}
