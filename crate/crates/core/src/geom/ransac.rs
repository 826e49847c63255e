use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::transform::RigidTransform;
use crate::error::{Error, Result};
use crate::util::seeded_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    pub sample_size: usize,
    /// Residual below which a correspondence counts as an inlier, meters.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 256,
            sample_size: 3,
            inlier_threshold: 1e-3,
            seed: 0,
        }
    }
}

/// Least-squares rigid fit (Kabsch) over corresponding points. Returns `None`
/// if the points are collinear or fewer than three.
pub fn kabsch(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Option<RigidTransform> {
    if src.len() != dst.len() || src.len() < 3 || collinear(src) || collinear(dst) {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rot = orthonormalize(rot);
    let t = cd - rot * cs;
    RigidTransform::new(rot, t).ok()
}

/// Projects a near-rotation onto SO(3) to clear accumulated rounding.
fn orthonormalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => {
            let d = (u * vt).determinant().signum();
            u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
        }
        _ => m,
    }
}

/// True when the point spread has rank below two.
pub(crate) fn collinear(pts: &[Point3<f64>]) -> bool {
    if pts.len() < 3 {
        return true;
    }
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let mut s = cov.symmetric_eigenvalues();
    s.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    s[0] <= 0.0 || s[1] <= 1e-12 * s[0]
}

/// RANSAC over minimal samples, then a Kabsch refit on the best inlier set.
pub fn estimate_rigid_transform(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    params: &RansacParams,
) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DegenerateInput(format!(
            "{} source points but {} targets",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateInput("fewer than 3 correspondences".into()));
    }
    let sample_size = params.sample_size.clamp(3, src.len());
    let mut rng = seeded_rng(params.seed);
    let mut best: Option<Vec<usize>> = None;
    let mut s_buf = Vec::with_capacity(sample_size);
    let mut d_buf = Vec::with_capacity(sample_size);
    for _ in 0..params.iterations.max(1) {
        let idx = sample(&mut rng, src.len(), sample_size);
        s_buf.clear();
        d_buf.clear();
        for i in idx.iter() {
            s_buf.push(src[i]);
            d_buf.push(dst[i]);
        }
        let Some(model) = kabsch(&s_buf, &d_buf) else { continue };
        let inliers = inliers_of(&model, src, dst, params.inlier_threshold);
        if best.as_ref().is_none_or(|b| inliers.len() > b.len()) {
            best = Some(inliers);
        }
    }
    let inliers = best.ok_or_else(|| Error::DegenerateInput("every sample was collinear".into()))?;
    let fit = refit(&inliers, src, dst)?;
    // one more round: the refit model may admit a larger consensus set
    let grown = inliers_of(&fit, src, dst, params.inlier_threshold);
    if grown.len() > inliers.len() {
        return refit(&grown, src, dst);
    }
    Ok(fit)
}

fn refit(inliers: &[usize], src: &[Point3<f64>], dst: &[Point3<f64>]) -> Result<RigidTransform> {
    let s: Vec<_> = inliers.iter().map(|&i| src[i]).collect();
    let d: Vec<_> = inliers.iter().map(|&i| dst[i]).collect();
    kabsch(&s, &d).ok_or_else(|| Error::DegenerateInput(format!("{} inliers do not span a plane", inliers.len())))
}

fn inliers_of(model: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>], thr: f64) -> Vec<usize> {
    src.iter()
        .zip(dst)
        .enumerate()
        .filter(|(_, (s, d))| (model.apply(s) - *d).norm() <= thr)
        .map(|(i, _)| i)
        .collect()
}
