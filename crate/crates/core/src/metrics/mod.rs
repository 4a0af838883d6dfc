//! Point-set discrepancy measures.
//!
//! Chamfer and Hausdorff distances run on k-d trees; the exact Earth Mover's
//! distance uses a Hungarian solver; the entropic variant is a log-domain
//! Sinkhorn divergence with epsilon annealing.

mod assignment;
mod sinkhorn;
mod uniformity;

pub use assignment::{emd_exact, optimal_assignment, EMD_EXACT_MAX_POINTS};
pub use sinkhorn::{emd_sinkhorn, sinkhorn_dual_trace, SinkhornConfig};
pub use uniformity::{mnuc, nuc, nuc_at, MNUC_DISK_FRACTIONS};

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::index::SpatialIndex;
use crate::vec3::Vec3;

/// Which discrepancy drives a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Chamfer,
    EmdExact,
    EmdSinkhorn,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Chamfer => "chamfer",
            MetricKind::EmdExact => "emd-exact",
            MetricKind::EmdSinkhorn => "emd-sinkhorn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chamfer" => Ok(MetricKind::Chamfer),
            "emd-exact" => Ok(MetricKind::EmdExact),
            "emd-sinkhorn" => Ok(MetricKind::EmdSinkhorn),
            other => Err(Error::invalid(format!("unknown metric kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricConfig {
    pub kind: MetricKind,
    pub sinkhorn: SinkhornConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: MetricKind::Chamfer,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        self.sinkhorn.validate()
    }
}

/// Chamfer distance: sum of both directed mean squared nearest-neighbor distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let ia = SpatialIndex::new(a);
    let ib = SpatialIndex::new(b);
    directed_mean_sq(a.points(), &ib) + directed_mean_sq(b.points(), &ia)
}

fn directed_mean_sq(from: &[Vec3], to: &SpatialIndex) -> f64 {
    let sum: f64 = from.iter().map(|&p| to.nearest(p).1).sum();
    sum / from.len() as f64
}

/// Symmetric Hausdorff distance (Euclidean, not squared).
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    let ia = SpatialIndex::new(a);
    let ib = SpatialIndex::new(b);
    let ab = a.points().iter().map(|&p| ib.nearest(p).1).fold(0.0, f64::max);
    let ba = b.points().iter().map(|&p| ia.nearest(p).1).fold(0.0, f64::max);
    ab.max(ba).sqrt()
}

/// Chamfer distance of `a` against a pre-indexed target, with its gradient
/// with respect to every point of `a`.
pub fn chamfer_with_grad(a: &[Vec3], target: &SpatialIndex) -> (f64, Vec<Vec3>) {
    let na = a.len() as f64;
    let nb = target.len() as f64;
    let ia = SpatialIndex::from_points(a);
    let mut grad = vec![[0.0; 3]; a.len()];
    let mut forward = 0.0;
    for (i, &p) in a.iter().enumerate() {
        let (j, d2) = target.nearest(p);
        forward += d2;
        let q = target.point(j);
        for k in 0..3 {
            grad[i][k] += 2.0 * (p[k] - q[k]) / na;
        }
    }
    let mut backward = 0.0;
    for j in 0..target.len() {
        let q = target.point(j);
        let (i, d2) = ia.nearest(q);
        backward += d2;
        for k in 0..3 {
            grad[i][k] += 2.0 * (a[i][k] - q[k]) / nb;
        }
    }
    (forward / na + backward / nb, grad)
}

/// Exact-assignment EMD with its gradient (fixed optimal matching).
pub fn emd_exact_with_grad(a: &[Vec3], b: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    let (cost, perm) = optimal_assignment(a, b)?;
    let n = a.len() as f64;
    let grad = a
        .iter()
        .zip(&perm)
        .map(|(p, &j)| {
            let q = b[j];
            [
                2.0 * (p[0] - q[0]) / n,
                2.0 * (p[1] - q[1]) / n,
                2.0 * (p[2] - q[2]) / n,
            ]
        })
        .collect();
    Ok((cost, grad))
}

/// A fixed target cloud prepared for repeated loss evaluations.
pub struct LossTarget {
    points: Vec<Vec3>,
    index: SpatialIndex,
}

impl LossTarget {
    pub fn new(pc: &PointCloud) -> Self {
        Self {
            points: pc.points().to_vec(),
            index: SpatialIndex::new(pc),
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Loss `D(a, target)` and its gradient with respect to `a`.
    ///
    /// `epsilon` overrides the Sinkhorn blur (used for annealing schedules).
    pub fn loss_and_grad(
        &self,
        a: &[Vec3],
        cfg: &MetricConfig,
        epsilon: Option<f64>,
    ) -> Result<(f64, Vec<Vec3>)> {
        match cfg.kind {
            MetricKind::Chamfer => Ok(chamfer_with_grad(a, &self.index)),
            MetricKind::EmdExact => emd_exact_with_grad(a, &self.points),
            MetricKind::EmdSinkhorn => {
                let mut sk = cfg.sinkhorn;
                if let Some(eps) = epsilon {
                    sk.epsilon = eps;
                    sk.epsilon_start = eps;
                }
                let a_pc = PointCloud::new(a.to_vec())?;
                let b_pc = PointCloud::new(self.points.clone())?;
                emd_sinkhorn(&a_pc, &b_pc, &sk)
            }
        }
    }
}
