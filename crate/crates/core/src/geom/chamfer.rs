use nalgebra::Point3;

use super::kdtree::KdTree;
use crate::error::{Error, Result};

/// Symmetric Chamfer distance using mean squared nearest-neighbor distances:
/// `mean_{p∈a} min_{q∈b} |p-q|² + mean_{q∈b} min_{p∈a} |q-p|²`.
pub fn chamfer_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ta = KdTree::new(a);
    let tb = KdTree::new(b);
    Ok(one_sided(a, &tb) + one_sided(b, &ta))
}

fn one_sided(from: &[Point3<f64>], to: &KdTree) -> f64 {
    let sum: f64 = from.iter().map(|p| to.nearest_sq(p).unwrap_or(0.0)).sum();
    sum / from.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
        let side = |x: &[Point3<f64>], y: &[Point3<f64>]| {
            x.iter()
                .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / x.len() as f64
        };
        side(a, b) + side(b, a)
    }

    #[test]
    fn single_points() {
        let a = [Point3::new(0.0, 0.0, 0.0)];
        let b = [Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn hand_evaluated_asymmetric_sizes() {
        let a = [Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        let b = [Point3::new(0.0, 0.0, 0.0)];
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(
            chamfer_distance(&[], &[Point3::origin()]),
            Err(Error::EmptyCloud)
        ));
        assert!(matches!(
            chamfer_distance(&[Point3::origin()], &[]),
            Err(Error::EmptyCloud)
        ));
    }

    fn cloud() -> impl Strategy<Value = Vec<Point3<f64>>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..40)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_brute(a in cloud(), b in cloud()) {
            let ab = chamfer_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, chamfer_distance(&b, &a).unwrap());
            prop_assert_eq!(ab, brute(&a, &b));
            prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        }
    }
}
