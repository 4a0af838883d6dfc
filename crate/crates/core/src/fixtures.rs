//! Deterministic analytic point clouds and sequences with index-aligned
//! ground-truth correspondence.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::vec3::{add, Vec3};

/// Regular `rows x cols` grid in the z = 0 plane spanning `[-0.5, 0.5]^2`,
/// in row-major order.
pub fn plane(rows: usize, cols: usize) -> Result<PointCloud> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid("plane fixture needs at least 2x2 points"));
    }
    let mut pts = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            pts.push([
                i as f64 / (rows - 1) as f64 - 0.5,
                j as f64 / (cols - 1) as f64 - 0.5,
                0.0,
            ]);
        }
    }
    PointCloud::new(pts)
}

/// Random rotation matrix drawn from a uniform quaternion.
fn random_rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(m: &[[f64; 3]; 3], p: Vec3) -> Vec3 {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// `n` near-uniform points (Fibonacci lattice) on a sphere of radius 0.5
/// centered at the origin, randomly rotated by `seed`.
pub fn sphere(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sphere fixture needs at least one point"));
    }
    let rot = random_rotation(&mut ChaCha8Rng::seed_from_u64(seed));
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let p = rotate(&rot, [r * phi.cos(), r * phi.sin(), z]);
            // re-project so the radius is exact after rotation round-off
            let len = crate::vec3::norm(p);
            [0.5 * p[0] / len, 0.5 * p[1] / len, 0.5 * p[2] / len]
        })
        .collect();
    PointCloud::new(pts)
}

/// Frame `t` is the base sphere shifted by `t * step` along x.
pub fn translating_sphere(n: usize, frames: usize, step: f64, seed: u64) -> Result<Vec<PointCloud>> {
    if frames == 0 {
        return Err(Error::invalid("sequence needs at least one frame"));
    }
    let base = sphere(n, seed)?;
    (0..frames)
        .map(|t| {
            let shift = [t as f64 * step, 0.0, 0.0];
            PointCloud::new(base.points().iter().map(|&p| add(p, shift)).collect())
        })
        .collect()
}

/// Parameters of the bending-cylinder sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderParams {
    pub rings: usize,
    pub per_ring: usize,
    pub radius: f64,
    pub length: f64,
    /// Curvature of the centerline in the last frame.
    pub max_curvature: f64,
}

impl Default for CylinderParams {
    fn default() -> Self {
        Self {
            rings: 64,
            per_ring: 32,
            radius: 0.12,
            length: 1.0,
            max_curvature: 2.5,
        }
    }
}

/// Cylinder along x whose centerline bends into a circular arc of growing
/// curvature. The centerline keeps its arc length in every frame.
pub fn bending_cylinder(p: &CylinderParams, frames: usize) -> Result<Vec<PointCloud>> {
    if frames == 0 || p.rings < 2 || p.per_ring < 3 {
        return Err(Error::invalid("bending cylinder needs >= 1 frame, >= 2 rings, >= 3 points per ring"));
    }
    (0..frames)
        .map(|t| {
            let kappa = if frames == 1 {
                0.0
            } else {
                p.max_curvature * t as f64 / (frames - 1) as f64
            };
            let mut pts = Vec::with_capacity(p.rings * p.per_ring);
            for i in 0..p.rings {
                let s = p.length * (i as f64 / (p.rings - 1) as f64 - 0.5);
                let (center, tangent) = centerline(s, kappa);
                let normal = [-tangent[1], tangent[0], 0.0];
                for j in 0..p.per_ring {
                    let phi = 2.0 * PI * j as f64 / p.per_ring as f64;
                    let (c, sn) = (p.radius * phi.cos(), p.radius * phi.sin());
                    pts.push([center[0] + c * normal[0], center[1] + c * normal[1], sn]);
                }
            }
            PointCloud::new(pts)
        })
        .collect()
}

/// Point and unit tangent at arc length `s` of a planar arc with curvature
/// `kappa` through the origin, tangent to x there.
fn centerline(s: f64, kappa: f64) -> (Vec3, Vec3) {
    if kappa == 0.0 {
        return ([s, 0.0, 0.0], [1.0, 0.0, 0.0]);
    }
    let theta = s * kappa;
    (
        [theta.sin() / kappa, (1.0 - theta.cos()) / kappa, 0.0],
        [theta.cos(), theta.sin(), 0.0],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::{norm, sub};

    #[test]
    fn sphere_radius_is_exact() {
        let pc = sphere(4096, 3).unwrap();
        assert_eq!(pc.len(), 4096);
        for p in pc.points() {
            assert!((norm(*p) - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn translation_is_exact() {
        let seq = translating_sphere(200, 4, 0.05, 0).unwrap();
        for (t, frame) in seq.iter().enumerate() {
            for (p, q) in frame.points().iter().zip(seq[0].points()) {
                assert_eq!(*p, [q[0] + t as f64 * 0.05, q[1], q[2]]);
            }
        }
    }

    #[test]
    fn cylinder_centerline_length_preserved() {
        let params = CylinderParams::default();
        let seq = bending_cylinder(&params, 5).unwrap();
        for frame in &seq {
            let centroids: Vec<Vec3> = frame
                .points()
                .chunks(params.per_ring)
                .map(|ring| {
                    let mut c = [0.0; 3];
                    for p in ring {
                        c = add(c, *p);
                    }
                    [c[0] / ring.len() as f64, c[1] / ring.len() as f64, c[2] / ring.len() as f64]
                })
                .collect();
            let arc: f64 = centroids.windows(2).map(|w| norm(sub(w[1], w[0]))).sum();
            assert!((arc - params.length).abs() / params.length < 0.01, "{arc}");
        }
    }

    #[test]
    fn plane_is_row_major_grid() {
        let pc = plane(3, 2).unwrap();
        assert_eq!(pc.get(2), [0.0, -0.5, 0.0]);
        assert_eq!(pc.get(5), [0.5, 0.5, 0.0]);
    }
}
