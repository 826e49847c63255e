//! Point-cloud and SE(3) primitives.

mod chamfer;
mod cloud;
mod kdtree;
mod ransac;
mod transform;
mod voxel;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

pub use chamfer::chamfer_distance;
pub use cloud::{Aabb, ObjectId, SegmentedCloud};
pub use kdtree::KdTree;
pub use ransac::{estimate_rigid_transform, kabsch, RansacParams};
pub use transform::{rotation_distance, RigidTransform};
pub use voxel::{lift_column_overlap, voxel_index, voxel_overlap, VoxelGrid, VoxelIndex, DEFAULT_VOXEL_SIZE};

use crate::error::Result;

/// Move one object by a rigid transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub object: ObjectId,
    pub transform: RigidTransform,
}

impl Action {
    pub fn new(object: ObjectId, transform: RigidTransform) -> Self {
        Self { object, transform }
    }
}

/// Maps every point of `action.object` through the action's transform;
/// other points and all labels are copied unchanged.
pub fn transform_object(cloud: &SegmentedCloud, action: &Action) -> Result<SegmentedCloud> {
    let t = action.transform;
    cloud.map_object(action.object, |p| t.apply(p))
}

/// Midpoint of the object's XY bounding box.
pub fn object_center(cloud: &SegmentedCloud, object: ObjectId) -> Result<[f64; 2]> {
    Ok(cloud.bbox(object)?.center_xy())
}

/// XY bounding-box center plus the lowest point's height: the point an
/// object rests on.
pub fn object_base(cloud: &SegmentedCloud, object: ObjectId) -> Result<Point3<f64>> {
    let bb = cloud.bbox(object)?;
    let [x, y] = bb.center_xy();
    Ok(Point3::new(x, y, bb.min.z))
}

/// Per-object Chamfer distance between two clouds with the same layout.
pub fn object_chamfer(a: &SegmentedCloud, b: &SegmentedCloud, object: ObjectId) -> Result<f64> {
    chamfer_distance(&a.object_point_vec(object)?, &b.object_point_vec(object)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::f64::consts::FRAC_PI_2;

    fn cloud(objs: &[(u32, Vec<[f64; 3]>)]) -> SegmentedCloud {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        let mut classes = BTreeMap::new();
        for (id, ps) in objs {
            classes.insert(ObjectId(*id), format!("obj{id}"));
            for p in ps {
                pts.push(Point3::new(p[0], p[1], p[2]));
                labels.push(ObjectId(*id));
            }
        }
        SegmentedCloud::new(pts, labels, classes).unwrap()
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let c = cloud(&[(0, vec![[0.1, 0.2, 0.3], [1.0, 2.0, 3.0]]), (1, vec![[5.0, 5.0, 5.0]])]);
        let out = transform_object(&c, &Action::new(ObjectId(0), RigidTransform::identity())).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let c = cloud(&[(3, vec![[1.0, 0.0, 0.0]])]);
        let a = Action::new(ObjectId(3), RigidTransform::from_yaw(FRAC_PI_2, Vector3::zeros()));
        let out = transform_object(&c, &a).unwrap();
        assert!((out.points()[0] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn translation_moves_only_target() {
        let c = cloud(&[
            (0, vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.02]]),
            (1, vec![[0.3, 0.3, 0.0], [0.31, 0.3, 0.04]]),
        ]);
        let a = Action::new(
            ObjectId(0),
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.05)),
        );
        let out = transform_object(&c, &a).unwrap();
        assert_eq!(out.points()[0], Point3::new(0.0, 0.0, 0.05));
        assert_eq!(out.points()[1], Point3::new(0.1, 0.0, 0.02 + 0.05));
        assert_eq!(out.points()[2..], c.points()[2..]);
        assert_eq!(out.labels(), c.labels());
    }

    #[test]
    fn unknown_object() {
        let c = cloud(&[(0, vec![[0.0; 3]])]);
        let a = Action::new(ObjectId(9), RigidTransform::identity());
        assert!(matches!(
            transform_object(&c, &a),
            Err(Error::UnknownObject(ObjectId(9)))
        ));
        assert!(matches!(object_center(&c, ObjectId(9)), Err(Error::UnknownObject(_))));
    }

    #[test]
    fn centers() {
        let c = cloud(&[
            (0, vec![[0.0, 2.0, 0.0], [4.0, 6.0, 1.0], [1.0, 3.0, 0.5]]),
            (1, vec![[1.5, -0.5, 0.2]]),
            (2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.1, 3.0, 0.0]]),
        ]);
        assert_eq!(object_center(&c, ObjectId(0)).unwrap(), [2.0, 4.0]);
        assert_eq!(object_center(&c, ObjectId(1)).unwrap(), [1.5, -0.5]);
        assert_eq!(object_center(&c, ObjectId(2)).unwrap(), [0.5, 1.5]);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64),
            -3.1..3.1f64,
            (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        )
            .prop_map(|((ax, ay, az), ang, (x, y, z))| {
                RigidTransform::from_axis_angle(Vector3::new(ax, ay, az), ang, Vector3::new(x, y, z))
            })
    }

    proptest! {
        #[test]
        fn inverse_restores_cloud(t in arb_transform(), pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..20)) {
            let c = cloud(&[(0, pts.iter().map(|&(x, y, z)| [x, y, z]).collect()), (1, vec![[0.5, 0.5, 0.5]])]);
            let there = transform_object(&c, &Action::new(ObjectId(0), t)).unwrap();
            let back = transform_object(&there, &Action::new(ObjectId(0), t.inverse())).unwrap();
            for (a, b) in back.points().iter().zip(c.points()) {
                prop_assert!((a - b).abs().max() < 1e-9);
            }
        }

        #[test]
        fn displaced_cloud_has_positive_chamfer(t in arb_transform(), pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..20)) {
            let a: Vec<_> = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let b: Vec<_> = a.iter().map(|p| t.apply(p)).collect();
            let moved = a.iter().zip(&b).any(|(p, q)| (p - q).norm() > 0.0);
            let cd = chamfer_distance(&a, &b).unwrap();
            if moved && a.iter().zip(&b).all(|(p, q)| (p - q).norm() > 1e-6) {
                prop_assert!(cd > 0.0);
            }
        }

        #[test]
        fn overlap_in_unit_interval_and_relabel_invariant(
            a in prop::collection::vec((0.0..0.1f64, 0.0..0.1f64, 0.0..0.1f64), 1..15),
            b in prop::collection::vec((0.0..0.1f64, 0.0..0.1f64, 0.0..0.1f64), 1..15),
            d in prop::collection::vec((0.0..0.1f64, 0.0..0.1f64, 0.0..0.1f64), 1..15),
        ) {
            let conv = |v: &Vec<(f64, f64, f64)>| v.iter().map(|&(x, y, z)| [x, y, z]).collect::<Vec<_>>();
            let c1 = cloud(&[(0, conv(&a)), (1, conv(&b)), (2, conv(&d))]);
            let c2 = cloud(&[(0, conv(&a)), (2, conv(&b)), (1, conv(&d))]);
            let o1 = voxel_overlap(&c1, ObjectId(0), 0.02).unwrap();
            let o2 = voxel_overlap(&c2, ObjectId(0), 0.02).unwrap();
            prop_assert!((0.0..=1.0).contains(&o1));
            prop_assert_eq!(o1, o2);
        }
    }
}
