use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::PlacementSource;
use crate::error::Result;
use crate::geom::{object_base, ObjectId, RigidTransform, SegmentedCloud};
use crate::scene::ContactParams;

/// Discrete placements: fixed table slots, then the top of every other
/// object in id order. Each comes with probability 1 and keeps the
/// object's orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotPlacements {
    pub slots: Vec<[f64; 2]>,
    #[serde(default)]
    pub contact: ContactParams,
}

impl SlotPlacements {
    pub fn new(slots: Vec<[f64; 2]>) -> Self {
        Self {
            slots,
            contact: ContactParams::default(),
        }
    }

    pub fn targets(&self, cloud: &SegmentedCloud, object: ObjectId) -> Result<Vec<Point3<f64>>> {
        let table = self.contact.rest_height(None);
        let mut out: Vec<Point3<f64>> = self.slots.iter().map(|s| Point3::new(s[0], s[1], table)).collect();
        for id in cloud.object_ids().filter(|id| *id != object) {
            let bb = cloud.bbox(id)?;
            let [x, y] = bb.center_xy();
            out.push(Point3::new(x, y, self.contact.rest_height(Some(bb.max.z))));
        }
        Ok(out)
    }
}

impl PlacementSource for SlotPlacements {
    fn propose(
        &self,
        cloud: &SegmentedCloud,
        object: ObjectId,
        k: usize,
        _seed: u64,
    ) -> Result<Vec<(RigidTransform, f64)>> {
        let base = object_base(cloud, object)?;
        Ok(self
            .targets(cloud, object)?
            .into_iter()
            .take(k)
            .map(|t| (RigidTransform::yaw_about(&base, 0.0, &t), 1.0))
            .collect())
    }
}
