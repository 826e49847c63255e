use std::f64::consts::TAU;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gap between an object's sampled surface points and its geometric faces.
/// Keeps contact planes of stacked objects in different voxel layers.
pub const SURFACE_INSET: f64 = 0.002;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    pub class: String,
    pub shape: Shape,
    /// Approximate distance between neighboring surface samples, meters.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_spacing() -> f64 {
    0.01
}

impl ObjectTemplate {
    pub fn block(class: &str, edge: f64) -> Self {
        Self {
            class: class.to_string(),
            shape: Shape::Box { size: [edge; 3] },
            spacing: default_spacing(),
        }
    }

    pub fn cylinder(class: &str, radius: f64, height: f64) -> Self {
        Self {
            class: class.to_string(),
            shape: Shape::Cylinder { radius, height },
            spacing: default_spacing(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.shape {
            Shape::Box { size } => size.iter().all(|s| *s > 2.0 * SURFACE_INSET),
            Shape::Cylinder { radius, height } => radius > SURFACE_INSET && height > 2.0 * SURFACE_INSET,
        };
        if !ok || !(self.spacing > 0.0) {
            return Err(Error::InvalidSpec(format!("degenerate template `{}`", self.class)));
        }
        if self.class.is_empty() {
            return Err(Error::InvalidSpec("empty class name".into()));
        }
        Ok(())
    }

    /// Radius of the XY disc that contains the object.
    pub fn footprint_radius(&self) -> f64 {
        match self.shape {
            Shape::Box { size } => 0.5 * (size[0] * size[0] + size[1] * size[1]).sqrt(),
            Shape::Cylinder { radius, .. } => radius,
        }
    }

    pub fn height(&self) -> f64 {
        match self.shape {
            Shape::Box { size } => size[2],
            Shape::Cylinder { height, .. } => height,
        }
    }

    /// Surface samples in the object frame: XY centered on the origin, base
    /// at z = 0, every point inset by [`SURFACE_INSET`].
    pub fn canonical_cloud(&self) -> Vec<Point3<f64>> {
        match self.shape {
            Shape::Box { size } => box_surface(size, self.spacing),
            Shape::Cylinder { radius, height } => cylinder_surface(radius, height, self.spacing),
        }
    }
}

fn steps(extent: f64, spacing: f64) -> usize {
    ((extent / spacing).round() as usize).max(1) + 1
}

fn lin(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

fn box_surface(size: [f64; 3], spacing: f64) -> Vec<Point3<f64>> {
    let hx = size[0] / 2.0 - SURFACE_INSET;
    let hy = size[1] / 2.0 - SURFACE_INSET;
    let (z0, z1) = (SURFACE_INSET, size[2] - SURFACE_INSET);
    let nx = steps(2.0 * hx, spacing);
    let ny = steps(2.0 * hy, spacing);
    let nz = steps(z1 - z0, spacing);
    let mut pts = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let on_face = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1;
                if on_face {
                    pts.push(Point3::new(
                        lin(-hx, hx, nx, i),
                        lin(-hy, hy, ny, j),
                        lin(z0, z1, nz, k),
                    ));
                }
            }
        }
    }
    pts
}

fn cylinder_surface(radius: f64, height: f64, spacing: f64) -> Vec<Point3<f64>> {
    let r = radius - SURFACE_INSET;
    let (z0, z1) = (SURFACE_INSET, height - SURFACE_INSET);
    let mut pts = Vec::new();
    let ring = |pts: &mut Vec<Point3<f64>>, rad: f64, z: f64| {
        if rad <= 1e-12 {
            pts.push(Point3::new(0.0, 0.0, z));
            return;
        }
        // multiple of 4 keeps the bounding box centered on the axis
        let n = ((TAU * rad / spacing).round() as usize).max(8).div_ceil(4) * 4;
        for i in 0..n {
            let a = TAU * i as f64 / n as f64;
            pts.push(Point3::new(rad * a.cos(), rad * a.sin(), z));
        }
    };
    let nr = steps(r, spacing);
    for z in [z0, z1] {
        for i in 0..nr {
            ring(&mut pts, lin(0.0, r, nr, i), z);
        }
    }
    let nz = steps(z1 - z0, spacing);
    for k in 1..nz.saturating_sub(1) {
        ring(&mut pts, r, lin(z0, z1, nz, k));
    }
    pts
}
