use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl ObjectId {
    /// Label for points that belong to the static scene (never movable).
    pub const STATIC: ObjectId = ObjectId(u32::MAX);
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == ObjectId::STATIC {
            write!(f, "static")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(mut pts: impl Iterator<Item = &'a Point3<f64>>) -> Option<Aabb> {
        let first = pts.next()?;
        let mut bb = Aabb {
            min: *first,
            max: *first,
        };
        for p in pts {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Some(bb)
    }

    /// Overlap of the XY projections, with the boundary counted as overlap.
    pub fn overlaps_xy(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x && other.min.x <= self.max.x && self.min.y <= other.max.y && other.min.y <= self.max.y
    }

    /// XY midpoint of the box.
    pub fn center_xy(&self) -> [f64; 2] {
        [(self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0]
    }
}

/// A scene observation: points partitioned into labeled rigid objects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudRepr", into = "CloudRepr")]
pub struct SegmentedCloud {
    points: Vec<Point3<f64>>,
    labels: Vec<ObjectId>,
    classes: BTreeMap<ObjectId, String>,
}

/// Flat on-disk form: `points` is `[x0, y0, z0, x1, ...]`.
#[derive(Serialize, Deserialize)]
struct CloudRepr {
    points: Vec<f64>,
    labels: Vec<u32>,
    classes: BTreeMap<u32, String>,
}

impl TryFrom<CloudRepr> for SegmentedCloud {
    type Error = Error;

    fn try_from(r: CloudRepr) -> Result<Self> {
        if !r.points.len().is_multiple_of(3) {
            return Err(Error::InvalidCloud("point array length is not a multiple of 3".into()));
        }
        let points = r
            .points
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        let labels = r.labels.into_iter().map(ObjectId).collect();
        let classes = r.classes.into_iter().map(|(k, v)| (ObjectId(k), v)).collect();
        SegmentedCloud::new(points, labels, classes)
    }
}

impl From<SegmentedCloud> for CloudRepr {
    fn from(c: SegmentedCloud) -> Self {
        CloudRepr {
            points: c.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
            labels: c.labels.iter().map(|l| l.0).collect(),
            classes: c.classes.into_iter().map(|(k, v)| (k.0, v)).collect(),
        }
    }
}

impl SegmentedCloud {
    /// `classes` defines the movable object set; every label must be one of
    /// its keys or [`ObjectId::STATIC`], and every movable object needs at
    /// least one point.
    pub fn new(points: Vec<Point3<f64>>, labels: Vec<ObjectId>, classes: BTreeMap<ObjectId, String>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::InvalidCloud(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if classes.contains_key(&ObjectId::STATIC) {
            return Err(Error::InvalidCloud("static id cannot be a movable object".into()));
        }
        if points.iter().any(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        let mut counts: BTreeMap<ObjectId, usize> = classes.keys().map(|&k| (k, 0)).collect();
        for l in &labels {
            if *l == ObjectId::STATIC {
                continue;
            }
            match counts.get_mut(l) {
                Some(c) => *c += 1,
                None => return Err(Error::InvalidCloud(format!("label {l} has no class entry"))),
            }
        }
        if let Some((id, _)) = counts.iter().find(|(_, &c)| c == 0) {
            return Err(Error::InvalidCloud(format!("object {id} owns no points")));
        }
        Ok(Self {
            points,
            labels,
            classes,
        })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[ObjectId] {
        &self.labels
    }

    pub fn classes(&self) -> &BTreeMap<ObjectId, String> {
        &self.classes
    }

    /// Movable object ids in ascending order.
    pub fn object_ids(&self) -> impl ExactSizeIterator<Item = ObjectId> + '_ {
        self.classes.keys().copied()
    }

    pub fn num_objects(&self) -> usize {
        self.classes.len()
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.classes.contains_key(&id)
    }

    pub fn class_of(&self, id: ObjectId) -> Result<&str> {
        self.classes
            .get(&id)
            .map(String::as_str)
            .ok_or(Error::UnknownObject(id))
    }

    /// First object (lowest id) of the given class.
    pub fn find_class(&self, class: &str) -> Option<ObjectId> {
        self.classes.iter().find(|(_, c)| c.as_str() == class).map(|(k, _)| *k)
    }

    pub fn ensure(&self, id: ObjectId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownObject(id))
        }
    }

    pub fn object_points(&self, id: ObjectId) -> impl Iterator<Item = &Point3<f64>> + '_ {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(move |(_, l)| **l == id)
            .map(|(p, _)| p)
    }

    pub fn object_point_vec(&self, id: ObjectId) -> Result<Vec<Point3<f64>>> {
        self.ensure(id)?;
        Ok(self.object_points(id).copied().collect())
    }

    pub fn point_count(&self, id: ObjectId) -> usize {
        self.labels.iter().filter(|l| **l == id).count()
    }

    pub fn bbox(&self, id: ObjectId) -> Result<Aabb> {
        self.ensure(id)?;
        Aabb::from_points(self.object_points(id)).ok_or(Error::UnknownObject(id))
    }

    /// Bounding boxes of every movable object, keyed by id.
    pub fn bboxes(&self) -> BTreeMap<ObjectId, Aabb> {
        let mut out: BTreeMap<ObjectId, Aabb> = BTreeMap::new();
        for (p, l) in self.points.iter().zip(&self.labels) {
            if *l == ObjectId::STATIC {
                continue;
            }
            out.entry(*l)
                .and_modify(|bb| {
                    bb.min = bb.min.inf(p);
                    bb.max = bb.max.sup(p);
                })
                .or_insert(Aabb { min: *p, max: *p });
        }
        out
    }

    /// Copy of the cloud with every point of `id` mapped through `f`.
    pub fn map_object(&self, id: ObjectId, mut f: impl FnMut(&Point3<f64>) -> Point3<f64>) -> Result<Self> {
        self.ensure(id)?;
        let points = self
            .points
            .iter()
            .zip(&self.labels)
            .map(|(p, l)| if *l == id { f(p) } else { *p })
            .collect();
        Ok(Self {
            points,
            labels: self.labels.clone(),
            classes: self.classes.clone(),
        })
    }

    /// Same objects, same labels: a candidate for per-object comparison.
    pub fn same_layout(&self, other: &SegmentedCloud) -> bool {
        self.classes == other.classes && self.labels == other.labels
    }
}
