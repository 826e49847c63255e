use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::Point3;

use super::cloud::{ObjectId, SegmentedCloud};
use crate::error::{Error, Result};

/// Default voxel edge length in meters.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.01;

pub type VoxelIndex = [i64; 3];

/// Occupancy grid anchored at the world origin.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    voxel_size: f64,
    occupied: HashMap<VoxelIndex, BTreeSet<ObjectId>>,
}

impl VoxelGrid {
    pub fn new(voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::InvalidVoxelSize(voxel_size));
        }
        Ok(Self {
            voxel_size,
            occupied: HashMap::new(),
        })
    }

    pub fn from_cloud(cloud: &SegmentedCloud, voxel_size: f64) -> Result<Self> {
        let mut grid = Self::new(voxel_size)?;
        for (p, l) in cloud.points().iter().zip(cloud.labels()) {
            grid.insert(p, *l);
        }
        Ok(grid)
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::origin()
    }

    #[inline]
    pub fn index_of(&self, p: &Point3<f64>) -> VoxelIndex {
        voxel_index(p, self.voxel_size)
    }

    pub fn insert(&mut self, p: &Point3<f64>, id: ObjectId) {
        let idx = self.index_of(p);
        self.occupied.entry(idx).or_default().insert(id);
    }

    pub fn occupants(&self, idx: &VoxelIndex) -> Option<&BTreeSet<ObjectId>> {
        self.occupied.get(idx)
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn voxels_of(&self, id: ObjectId) -> impl Iterator<Item = &VoxelIndex> + '_ {
        self.occupied
            .iter()
            .filter(move |(_, ids)| ids.contains(&id))
            .map(|(k, _)| k)
    }
}

#[inline]
pub fn voxel_index(p: &Point3<f64>, size: f64) -> VoxelIndex {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Fraction of the voxels occupied by `moved` that also hold a point of any
/// other object (static scene included).
pub fn voxel_overlap(cloud: &SegmentedCloud, moved: ObjectId, voxel_size: f64) -> Result<f64> {
    cloud.ensure(moved)?;
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidVoxelSize(voxel_size));
    }
    let mut mine: HashSet<VoxelIndex> = HashSet::new();
    let mut others: HashSet<VoxelIndex> = HashSet::new();
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        let idx = voxel_index(p, voxel_size);
        if *l == moved {
            mine.insert(idx);
        } else {
            others.insert(idx);
        }
    }
    let shared = mine.iter().filter(|v| others.contains(*v)).count();
    Ok(shared as f64 / mine.len() as f64)
}

/// Fraction of the XY voxel columns under `moved` that contain another
/// object's voxel above the bottom layer of `moved`: how much of its straight
/// vertical lift path is blocked.
pub fn lift_column_overlap(cloud: &SegmentedCloud, moved: ObjectId, voxel_size: f64) -> Result<f64> {
    cloud.ensure(moved)?;
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidVoxelSize(voxel_size));
    }
    let mut columns: HashMap<[i64; 2], i64> = HashMap::new();
    for p in cloud.object_points(moved) {
        let [x, y, z] = voxel_index(p, voxel_size);
        columns.entry([x, y]).and_modify(|b| *b = (*b).min(z)).or_insert(z);
    }
    let bottom = columns.values().copied().min().unwrap_or(0);
    let mut blocked: HashSet<[i64; 2]> = HashSet::new();
    for (p, l) in cloud.points().iter().zip(cloud.labels()) {
        if *l == moved {
            continue;
        }
        let [x, y, z] = voxel_index(p, voxel_size);
        if z > bottom && columns.contains_key(&[x, y]) {
            blocked.insert([x, y]);
        }
    }
    Ok(blocked.len() as f64 / columns.len() as f64)
}
