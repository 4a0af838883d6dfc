//! Point cloud containers, unit-box normalization and farthest point sampling.

use crate::error::{Error, Result};
use crate::vec3::{dist2, Vec3};

/// An ordered set of 3D points. Never empty, always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: usize) -> Vec3 {
        self.points[id]
    }

    /// Sub-cloud made of the given ids, in the given order.
    pub fn select(&self, ids: &[usize]) -> Result<PointCloud> {
        PointCloud::new(ids.iter().map(|&i| self.points[i]).collect())
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(self.points.iter())
    }
}

fn bounds_of<'a>(points: impl Iterator<Item = &'a Vec3>) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Affine map `p -> (p - center) / scale` taking data into the unit box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl Default for NormalizationTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    /// Transform centering the joint bounding box of `clouds` at the origin
    /// with its longest side scaled to 1.
    pub fn fit_unit_box(clouds: &[&PointCloud]) -> Result<Self> {
        if clouds.is_empty() {
            return Err(Error::invalid("no point clouds to normalize"));
        }
        let (lo, hi) = bounds_of(clouds.iter().flat_map(|c| c.points().iter()));
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0_f64, f64::max);
        let scale = if extent > 0.0 { extent } else { 1.0 };
        Ok(Self { center, scale })
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        [
            (p[0] - self.center[0]) / self.scale,
            (p[1] - self.center[1]) / self.scale,
            (p[2] - self.center[2]) / self.scale,
        ]
    }

    pub fn invert_point(&self, p: Vec3) -> Vec3 {
        [
            p[0] * self.scale + self.center[0],
            p[1] * self.scale + self.center[1],
            p[2] * self.scale + self.center[2],
        ]
    }

    pub fn apply(&self, pc: &PointCloud) -> PointCloud {
        PointCloud {
            points: pc.points.iter().map(|&p| self.apply_point(p)).collect(),
        }
    }

    pub fn invert(&self, pc: &PointCloud) -> PointCloud {
        PointCloud {
            points: pc.points.iter().map(|&p| self.invert_point(p)).collect(),
        }
    }
}

/// Normalize a cloud into `[-0.5, 0.5]^3`, longest bounding-box side spanning 1.
pub fn normalize_unit_box(pc: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    let t = NormalizationTransform::fit_unit_box(&[pc])?;
    Ok((t.apply(pc), t))
}

/// Greedy farthest point sampling starting from `seed_id`.
///
/// Ties go to the lower id, so the result is a pure function of the inputs.
pub fn farthest_point_sample(pc: &PointCloud, m: usize, seed_id: usize) -> Result<Vec<usize>> {
    let n = pc.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "cannot sample {m} points from a cloud of {n}"
        )));
    }
    if seed_id >= n {
        return Err(Error::invalid(format!("seed id {seed_id} out of range for {n} points")));
    }
    let pts = pc.points();
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(m);
    let mut current = seed_id;
    loop {
        out.push(current);
        taken[current] = true;
        if out.len() == m {
            break;
        }
        let c = pts[current];
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = dist2(*p, c);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if min_d2[i] > best_d2 {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(out)
}
