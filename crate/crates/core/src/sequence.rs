//! Sequence-wise structurization: carry the structured grid from frame to
//! frame with per-pixel displacement fields, plus linear interpolation
//! between frames.

use crate::autodiff::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::frame::{reproject, structurize_frame, FitReport, FrameFitConfig, LrSchedule, SpcvFrame};
use crate::geom::{NormalizationTransform, PointCloud};
use crate::index::SpatialIndex;
use crate::io::{FrameMeta, SpcvContainer};
use crate::metrics::{LossTarget, MetricConfig, MetricKind};
use crate::vec3::{add, dist2, norm, sub, Vec3};

/// Per-pixel displacement between two consecutive frames.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    rows: usize,
    cols: usize,
    offsets: Vec<Vec3>,
}

impl DeformationField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            offsets: vec![[0.0; 3]; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, offsets: Vec<Vec3>) -> Result<Self> {
        if offsets.len() != rows * cols {
            return Err(Error::invalid("deformation size does not match its dimensions"));
        }
        if offsets.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("deformation holds a non-finite offset"));
        }
        Ok(Self { rows, cols, offsets })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Offsets in row-major pixel order.
    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn mean_norm(&self) -> f64 {
        self.offsets.iter().map(|&d| norm(d)).sum::<f64>() / self.offsets.len() as f64
    }

    /// `frame + self`, pixel by pixel.
    pub fn apply(&self, frame: &SpcvFrame) -> Result<SpcvFrame> {
        if frame.dims() != self.dims() {
            return Err(Error::invalid("deformation and frame dimensions differ"));
        }
        let px = frame.pixels().iter().zip(&self.offsets).map(|(&p, &d)| add(p, d)).collect();
        SpcvFrame::new(self.rows, self.cols, px)
    }
}

/// `K` nearest neighbors (self excluded) of every point, with inverse
/// squared-distance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl KnnGraph {
    /// Weights are `1 / max(d^2, weight_floor)`.
    pub fn build(points: &[Vec3], k: usize, weight_floor: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be >= 1"));
        }
        if !(weight_floor > 0.0) {
            return Err(Error::invalid("weight floor must be positive"));
        }
        if points.len() <= k {
            return Err(Error::invalid(format!("{} points cannot have {k} neighbors each", points.len())));
        }
        let index = SpatialIndex::from_points(points);
        let mut neighbors = Vec::with_capacity(points.len() * k);
        let mut weights = Vec::with_capacity(points.len() * k);
        for (i, &p) in points.iter().enumerate() {
            let nn = index
                .knn_ids(p, k + 1)
                .into_iter()
                .filter(|&j| j != i)
                .take(k);
            for j in nn {
                neighbors.push(j);
                weights.push(1.0 / dist2(p, points[j]).max(weight_floor));
            }
        }
        Ok(Self { k, neighbors, weights })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// `(neighbor ids, weights)` of node `i`.
    pub fn node(&self, i: usize) -> (&[usize], &[f64]) {
        let r = i * self.k..(i + 1) * self.k;
        (&self.neighbors[r.clone()], &self.weights[r])
    }
}

/// Weighted local variation of a displacement field:
/// `(1/N) sum_i [sum_j w_ij |d_i - d_j|^2] / [sum_j w_ij]`.
pub fn r_smooth(delta: &[Vec3], graph: &KnnGraph) -> Result<f64> {
    Ok(r_smooth_with_grad(delta, graph)?.0)
}

pub fn r_smooth_with_grad(delta: &[Vec3], graph: &KnnGraph) -> Result<(f64, Vec<Vec3>)> {
    if delta.len() != graph.len() {
        return Err(Error::invalid(format!(
            "field has {} entries, graph has {} nodes",
            delta.len(),
            graph.len()
        )));
    }
    let n = delta.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 3]; delta.len()];
    for i in 0..delta.len() {
        let (ids, ws) = graph.node(i);
        let total: f64 = ws.iter().sum();
        let mut acc = 0.0;
        for (&j, &w) in ids.iter().zip(ws) {
            let d = sub(delta[i], delta[j]);
            acc += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            let c = 2.0 * w / (total * n);
            for k in 0..3 {
                grad[i][k] += c * d[k];
                grad[j][k] -= c * d[k];
            }
        }
        value += acc / total;
    }
    Ok((value / n, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeqFitConfig {
    pub lambda: f64,
    pub k: usize,
    pub metric: MetricConfig,
    pub steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub weight_floor: f64,
    /// Optimization stops early once the total loss is at or below this.
    pub tolerance: f64,
}

impl Default for SeqFitConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            k: 8,
            metric: MetricConfig::default(),
            steps: 2000,
            learning_rate: 1e-2,
            schedule: LrSchedule::Cosine {
                floor: 0.01,
                warmup: 0.0,
            },
            weight_floor: 1e-8,
            tolerance: 1e-12,
        }
    }
}

impl SeqFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be nonnegative"));
        }
        if self.k == 0 {
            return Err(Error::invalid("K must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.weight_floor > 0.0) {
            return Err(Error::invalid("weight floor must be positive"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid("tolerance must be finite and nonnegative"));
        }
        self.metric.validate()
    }
}

fn sinkhorn_epsilon(cfg: &MetricConfig, step: usize, total: usize) -> Option<f64> {
    if cfg.kind != MetricKind::EmdSinkhorn {
        return None;
    }
    let s = &cfg.sinkhorn;
    let t = (step as f64 / (total.max(2) - 1) as f64).min(1.0);
    Some(s.epsilon_start * (s.epsilon / s.epsilon_start).powf(t))
}

/// Fit the displacement carrying `prev` onto `target`, starting from zero.
pub fn estimate_deformation(
    prev: &SpcvFrame,
    target: &PointCloud,
    cfg: &SeqFitConfig,
) -> Result<(DeformationField, FitReport)> {
    cfg.validate()?;
    let (rows, cols) = prev.dims();
    let base = prev.pixels();
    let graph = KnnGraph::build(base, cfg.k, cfg.weight_floor)?;
    let loss_target = LossTarget::new(target);
    let mut delta = vec![[0.0; 3]; base.len()];
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..Default::default()
        },
        &[3 * base.len()],
    );
    let mut curve = Vec::with_capacity(cfg.steps);

    let objective = |delta: &[Vec3], step: usize| -> Result<(f64, f64, Vec<f64>)> {
        let moved: Vec<Vec3> = base.iter().zip(delta).map(|(&p, &d)| add(p, d)).collect();
        let eps = sinkhorn_epsilon(&cfg.metric, step, cfg.steps);
        let (dist, dgrad) = loss_target.loss_and_grad(&moved, &cfg.metric, eps)?;
        let (reg, rgrad) = r_smooth_with_grad(delta, &graph)?;
        let grad = dgrad
            .iter()
            .zip(&rgrad)
            .flat_map(|(a, b)| [a[0] + cfg.lambda * b[0], a[1] + cfg.lambda * b[1], a[2] + cfg.lambda * b[2]])
            .collect();
        Ok((dist, cfg.lambda * reg, grad))
    };

    for step in 0..cfg.steps {
        let (dist, reg, grad) = objective(&delta, step)?;
        let loss = dist + reg;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                context: "deformation loss".into(),
                step,
            });
        }
        curve.push(loss);
        if loss <= cfg.tolerance {
            break;
        }
        adam.set_learning_rate(cfg.schedule.rate(cfg.learning_rate, step, cfg.steps));
        let flat = delta.as_flattened_mut();
        adam_step(&mut [flat], &[&grad], &mut adam).map_err(|e| match e {
            Error::NonFinite { context, .. } => Error::NonFinite { context, step },
            other => other,
        })?;
    }
    let (dist, reg, _) = objective(&delta, cfg.steps)?;
    if !(dist + reg).is_finite() {
        return Err(Error::NonFinite {
            context: "deformation loss".into(),
            step: cfg.steps,
        });
    }
    Ok((
        DeformationField::new(rows, cols, delta)?,
        FitReport {
            loss_curve: curve,
            final_distance: dist,
            final_regularizer: reg,
        },
    ))
}

/// Output of [`structurize_sequence`].
#[derive(Clone, Debug)]
pub struct SequenceFit {
    pub container: SpcvContainer,
    /// One report per frame: the generator fit, then each deformation fit.
    pub reports: Vec<FitReport>,
    pub deformations: Vec<DeformationField>,
}

/// Structure a whole sequence: fit frame 0 with the generator, then carry
/// the grid forward with `G_t = G_{t-1} + D_t`.
///
/// All frames are normalized with one transform over the union of their
/// bounding boxes. `names` label frames in the container metadata.
pub fn structurize_sequence(
    frames: &[PointCloud],
    names: &[String],
    rows: usize,
    cols: usize,
    frame_cfg: &FrameFitConfig,
    seq_cfg: &SeqFitConfig,
    seed: u64,
) -> Result<SequenceFit> {
    structurize_sequence_with(frames, names, rows, cols, frame_cfg, seq_cfg, seed, |_| {})
}

/// Like [`structurize_sequence`], calling `progress(t)` as each frame finishes.
#[allow(clippy::too_many_arguments)]
pub fn structurize_sequence_with(
    frames: &[PointCloud],
    names: &[String],
    rows: usize,
    cols: usize,
    frame_cfg: &FrameFitConfig,
    seq_cfg: &SeqFitConfig,
    seed: u64,
    mut progress: impl FnMut(usize),
) -> Result<SequenceFit> {
    if frames.is_empty() {
        return Err(Error::invalid("sequence needs at least one frame"));
    }
    if names.len() != frames.len() {
        return Err(Error::invalid("one name per frame required"));
    }
    seq_cfg.validate()?;
    let refs: Vec<&PointCloud> = frames.iter().collect();
    let transform = NormalizationTransform::fit_unit_box(&refs)?;
    let normalized: Vec<PointCloud> = frames.iter().map(|f| transform.apply(f)).collect();

    let first = structurize_frame(&normalized[0], rows, cols, frame_cfg, seed).map_err(|e| e.in_frame(0))?;
    let mut container = SpcvContainer::new(rows, cols, transform)?;
    container.push(
        first.frame.clone(),
        FrameMeta {
            source: names[0].clone(),
            fit_loss: first.report.final_loss(),
        },
    )?;
    progress(0);
    let mut reports = vec![first.report];
    let mut deformations = Vec::with_capacity(frames.len() - 1);
    let mut current = first.frame;
    for t in 1..frames.len() {
        let (delta, report) =
            estimate_deformation(&current, &normalized[t], seq_cfg).map_err(|e| e.in_frame(t))?;
        current = delta.apply(&current).map_err(|e| e.in_frame(t))?;
        container.push(
            current.clone(),
            FrameMeta {
                source: names[t].clone(),
                fit_loss: report.final_loss(),
            },
        )?;
        reports.push(report);
        deformations.push(delta);
        progress(t);
    }
    Ok(SequenceFit {
        container,
        reports,
        deformations,
    })
}

/// Pixel-wise linear blend of two frames at time `t` in `[t1, t2]`.
pub fn interpolate_linear(f1: &SpcvFrame, f2: &SpcvFrame, t1: f64, t2: f64, t: f64) -> Result<SpcvFrame> {
    if f1.dims() != f2.dims() {
        return Err(Error::invalid(format!(
            "cannot interpolate {}x{} with {}x{}",
            f1.rows(),
            f1.cols(),
            f2.rows(),
            f2.cols()
        )));
    }
    if !(t1 < t2) || !(t1..=t2).contains(&t) {
        return Err(Error::invalid(format!("need t1 <= t <= t2 with t1 < t2, got {t1}, {t}, {t2}")));
    }
    if t == t1 {
        return Ok(f1.clone());
    }
    if t == t2 {
        return Ok(f2.clone());
    }
    let span = t2 - t1;
    let (a, b) = ((t2 - t) / span, (t - t1) / span);
    let px = f1
        .pixels()
        .iter()
        .zip(f2.pixels())
        .map(|(p, q)| [a * p[0] + b * q[0], a * p[1] + b * q[1], a * p[2] + b * q[2]])
        .collect();
    SpcvFrame::new(f1.rows(), f1.cols(), px)
}

/// Reproject every frame of a container.
pub fn reproject_all(container: &SpcvContainer) -> Vec<PointCloud> {
    container.frames().iter().map(reproject).collect()
}
