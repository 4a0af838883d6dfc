//! Frame-wise structurization: overfit the generator so that the flat
//! `(u, v, 0)` grid maps onto the first point cloud of a sequence.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{
    adam_step, AdamConfig, AdamState, GeneratorArch, GeneratorGrads, GeneratorParams, GridAxis, Tape,
    Tensor, Var,
};
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::metrics::{LossTarget, MetricConfig, MetricKind};
use crate::vec3::Vec3;

/// A `U x V` grid of 3D coordinates, stored row-major (`id = i * V + j`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpcvFrame {
    rows: usize,
    cols: usize,
    pixels: Vec<Vec3>,
}

impl SpcvFrame {
    pub fn new(rows: usize, cols: usize, pixels: Vec<Vec3>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if pixels.len() != rows * cols {
            return Err(Error::invalid(format!(
                "frame {rows}x{cols} needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if pixels.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("frame holds a non-finite coordinate"));
        }
        Ok(Self { rows, cols, pixels })
    }

    /// Row-major regridding of a point cloud.
    pub fn regrid(pc: &PointCloud, rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, pc.points().to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pixels(&self) -> &[Vec3] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Vec3] {
        &mut self.pixels
    }

    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.pixels[i * self.cols + j]
    }

    /// Channel-planar `3 x U x V` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let hw = self.pixels.len();
        let mut data = vec![0.0; 3 * hw];
        for (p, v) in self.pixels.iter().enumerate() {
            for k in 0..3 {
                data[k * hw + p] = v[k];
            }
        }
        Tensor::new(&[3, self.rows, self.cols], data).expect("frame tensor shape")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.chw()?;
        if c != 3 {
            return Err(Error::invalid("frame tensor must have 3 channels"));
        }
        let hw = h * w;
        let d = t.data();
        let pixels = (0..hw).map(|p| [d[p], d[hw + p], d[2 * hw + p]]).collect();
        Self::new(h, w, pixels)
    }
}

/// Flatten a frame row-major into a point cloud (`id = i * V + j`).
pub fn reproject(frame: &SpcvFrame) -> PointCloud {
    PointCloud::new(frame.pixels.clone()).expect("frames are nonempty and finite")
}

/// The generator input: pixel `(i, j)` holds `(i / (U-1), j / (V-1), 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInit(pub SpcvFrame);

pub fn make_grid_init(rows: usize, cols: usize) -> Result<GridInit> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid("grid init needs U, V >= 2"));
    }
    let mut pixels = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            pixels.push([i as f64 / (rows - 1) as f64, j as f64 / (cols - 1) as f64, 0.0]);
        }
    }
    Ok(GridInit(SpcvFrame::new(rows, cols, pixels)?))
}

/// Per-pixel unit normals; `valid[p]` is false where the tangent cross
/// product vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    pub rows: usize,
    pub cols: usize,
    pub normals: Vec<Vec3>,
    pub valid: Vec<bool>,
}

/// Cross products at or below this norm are treated as degenerate.
const DEGENERATE_NORM: f64 = 1e-14;

/// Normals from the cross product of the grid's finite-difference partials.
pub fn compute_normals(frame: &SpcvFrame) -> Result<NormalMap> {
    if frame.rows < 3 || frame.cols < 3 {
        return Err(Error::invalid("normals need at least a 3x3 frame"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(frame.to_tensor())?;
    let (n, valid) = record_normals(&mut tape, x)?;
    let f = SpcvFrame::from_tensor(tape.value(n))?;
    Ok(NormalMap {
        rows: frame.rows,
        cols: frame.cols,
        normals: f.pixels,
        valid,
    })
}

fn record_normals(tape: &mut Tape, x: Var) -> Result<(Var, Vec<bool>)> {
    let du = tape.grid_diff(x, GridAxis::Rows)?;
    let dv = tape.grid_diff(x, GridAxis::Cols)?;
    let c = tape.cross(du, dv)?;
    tape.normalize(c, DEGENERATE_NORM)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Linear warmup over the first `warmup` fraction of the run, then cosine
    /// decay from the base rate to `floor * base`.
    Cosine { floor: f64, warmup: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, step: usize, total: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { floor, warmup } => {
                let total = total.max(1) as f64;
                let warm = (warmup * total).floor();
                let step = step as f64;
                if step < warm {
                    return base * (step + 1.0) / (warm + 1.0);
                }
                let t = (step - warm) / (total - warm).max(1.0);
                let lo = floor * base;
                lo + 0.5 * (base - lo) * (1.0 + (PI * t).cos())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFitConfig {
    pub lambda_s: f64,
    pub lambda_n: f64,
    /// Odd window side `L` of the regularizer.
    pub window: usize,
    pub metric: MetricConfig,
    pub steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub arch: GeneratorArch,
    /// Training stops early once the total loss is at or below this.
    pub tolerance: f64,
}

impl Default for FrameFitConfig {
    fn default() -> Self {
        Self {
            lambda_s: 20.0,
            lambda_n: 0.1,
            window: 3,
            metric: MetricConfig::default(),
            steps: 5000,
            learning_rate: 1e-3,
            schedule: LrSchedule::Cosine {
                floor: 0.01,
                warmup: 0.05,
            },
            arch: GeneratorArch::default(),
            tolerance: 1e-12,
        }
    }
}

impl FrameFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::invalid(format!("window must be odd and >= 3, got {}", self.window)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.lambda_s >= 0.0 && self.lambda_n >= 0.0) {
            return Err(Error::invalid("regularizer weights must be nonnegative"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid("tolerance must be finite and nonnegative"));
        }
        self.metric.validate()?;
        self.arch.validate()
    }
}

/// Record the geometric regularizer of a `3 x U x V` frame node.
///
/// Spatial term: squared distance of each interior pixel to its window mean.
/// Normal term: same for unit normals, with degenerate normals dropped both as
/// window members and as centers. Both are averaged over the interior pixels
/// so the weights do not depend on the grid resolution.
pub fn record_r_geo(tape: &mut Tape, x: Var, lambda_s: f64, lambda_n: f64, window: usize) -> Result<Var> {
    let (_, h, w) = tape.value(x).chw()?;
    if window > h || window > w {
        return Err(Error::invalid(format!("window {window} larger than frame {h}x{w}")));
    }
    let border = window / 2;
    let per_window = 1.0 / ((h - 2 * border) * (w - 2 * border)) as f64;

    let center = tape.crop(x, border)?;
    let mean = tape.window_mean(x, window, None)?;
    let diff = tape.sub(center, mean)?;
    let sq = tape.square(diff)?;
    let spatial = tape.sum(sq)?;
    let spatial = tape.scale(spatial, lambda_s * per_window)?;

    let (normals, valid) = record_normals(tape, x)?;
    let weights: Vec<f64> = valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let n_center = tape.crop(normals, border)?;
    let n_mean = tape.window_mean(normals, window, Some(weights))?;
    let n_diff = tape.sub(n_center, n_mean)?;
    let (oh, ow) = (h - 2 * border, w - 2 * border);
    let mut mask = vec![0.0; 3 * oh * ow];
    for y in 0..oh {
        for xx in 0..ow {
            if valid[(y + border) * w + xx + border] {
                for k in 0..3 {
                    mask[(k * oh + y) * ow + xx] = 1.0;
                }
            }
        }
    }
    let n_diff = tape.mul_const(n_diff, mask)?;
    let n_sq = tape.square(n_diff)?;
    let normal = tape.sum(n_sq)?;
    let normal = tape.scale(normal, lambda_n * per_window)?;
    tape.add(spatial, normal)
}

/// Value of the geometric regularizer, evaluated with plain loops over
/// `frame` and precomputed `normals`.
pub fn r_geo(frame: &SpcvFrame, normals: &NormalMap, cfg: &FrameFitConfig) -> Result<f64> {
    let l = cfg.window;
    if l < 3 || l % 2 == 0 {
        return Err(Error::invalid("window must be odd and >= 3"));
    }
    let (h, w) = frame.dims();
    if l > h || l > w || normals.rows != h || normals.cols != w {
        return Err(Error::invalid("frame/normal/window dimensions disagree"));
    }
    let b = l / 2;
    let mut spatial = 0.0;
    let mut normal = 0.0;
    for i in b..h - b {
        for j in b..w - b {
            let mut mean = [0.0; 3];
            let mut nmean = [0.0; 3];
            let mut nvalid = 0usize;
            for di in i - b..=i + b {
                for dj in j - b..=j + b {
                    let p = di * w + dj;
                    for k in 0..3 {
                        mean[k] += frame.pixels[p][k];
                    }
                    if normals.valid[p] {
                        nvalid += 1;
                        for k in 0..3 {
                            nmean[k] += normals.normals[p][k];
                        }
                    }
                }
            }
            let c = frame.at(i, j);
            for k in 0..3 {
                let d = c[k] - mean[k] / (l * l) as f64;
                spatial += d * d;
            }
            let p = i * w + j;
            if normals.valid[p] && nvalid > 0 {
                for k in 0..3 {
                    let d = normals.normals[p][k] - nmean[k] / nvalid as f64;
                    normal += d * d;
                }
            }
        }
    }
    let windows = ((h - 2 * b) * (w - 2 * b)) as f64;
    Ok((cfg.lambda_s * spatial + cfg.lambda_n * normal) / windows)
}

/// Value and gradient (per pixel) of the geometric regularizer.
pub fn r_geo_with_grad(frame: &SpcvFrame, cfg: &FrameFitConfig) -> Result<(f64, Vec<Vec3>)> {
    let mut tape = Tape::new();
    let x = tape.leaf(frame.to_tensor())?;
    let r = tape_r_geo(&mut tape, x, cfg)?;
    let value = tape.value(r).data()[0];
    let grads = tape.backward(&[(r, &Tensor::scalar(1.0))])?;
    let g = SpcvFrame::from_tensor(&grads.get_or_zero(x))?;
    Ok((value, g.pixels))
}

fn tape_r_geo(tape: &mut Tape, x: Var, cfg: &FrameFitConfig) -> Result<Var> {
    record_r_geo(tape, x, cfg.lambda_s, cfg.lambda_n, cfg.window)
}

/// Diagnostics of one fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Total objective before each optimizer step.
    pub loss_curve: Vec<f64>,
    pub final_distance: f64,
    pub final_regularizer: f64,
}

impl FitReport {
    pub fn final_loss(&self) -> f64 {
        self.final_distance + self.final_regularizer
    }
}

#[derive(Clone, Debug)]
pub struct FrameFit {
    pub frame: SpcvFrame,
    pub params: GeneratorParams,
    pub report: FitReport,
}

/// Generator evaluation plus the residual offset: `G0 = base + f(G_init)`,
/// where `base` is the init grid recentred on the origin. The zero-initialized
/// output layer therefore starts training from a flat centred grid.
struct Evaluation {
    tape: Tape,
    frame: Var,
    regularizer: Var,
    params: Vec<(Var, Var)>,
}

fn evaluate(
    params: &GeneratorParams,
    input: &Tensor,
    base: &Tensor,
    cfg: &FrameFitConfig,
) -> Result<Evaluation> {
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone())?;
    let (out, vars) = params.record(&mut tape, x)?;
    let b = tape.leaf(base.clone())?;
    let frame = tape.add(out, b)?;
    let regularizer = tape_r_geo(&mut tape, frame, cfg)?;
    Ok(Evaluation {
        tape,
        frame,
        regularizer,
        params: vars,
    })
}

fn centred_base(init: &GridInit) -> Tensor {
    let mut t = init.0.to_tensor();
    let hw = init.0.pixels.len();
    for v in &mut t.data_mut()[..2 * hw] {
        *v -= 0.5;
    }
    t
}

fn points_of(t: &Tensor) -> Vec<Vec3> {
    let hw = t.len() / 3;
    let d = t.data();
    (0..hw).map(|p| [d[p], d[hw + p], d[2 * hw + p]]).collect()
}

fn epsilon_at(cfg: &MetricConfig, step: usize, total: usize) -> Option<f64> {
    if cfg.kind != MetricKind::EmdSinkhorn {
        return None;
    }
    let s = &cfg.sinkhorn;
    let t = step as f64 / (total.max(2) - 1) as f64;
    Some(s.epsilon_start * (s.epsilon / s.epsilon_start).powf(t.min(1.0)))
}

/// Fit the generator so the `rows x cols` grid reproduces `target`.
///
/// Deterministic given `seed`. A non-finite loss aborts with
/// [`Error::NonFinite`]; use [`structurize_frame_with`] to also recover the
/// last finite frame.
pub fn structurize_frame(target: &PointCloud, rows: usize, cols: usize, cfg: &FrameFitConfig, seed: u64) -> Result<FrameFit> {
    structurize_frame_with(target, rows, cols, cfg, seed, |_, _| {}).map_err(|(e, _)| e)
}

/// Like [`structurize_frame`], calling `progress(step, loss)` after each step.
/// On failure the error is paired with the last finite frame, if any.
pub fn structurize_frame_with(
    target: &PointCloud,
    rows: usize,
    cols: usize,
    cfg: &FrameFitConfig,
    seed: u64,
    mut progress: impl FnMut(usize, f64),
) -> std::result::Result<FrameFit, (Error, Option<SpcvFrame>)> {
    cfg.validate().map_err(|e| (e, None))?;
    if rows < cfg.window || cols < cfg.window || rows < cfg.arch.kernel || cols < cfg.arch.kernel {
        return Err((Error::invalid(format!("grid {rows}x{cols} smaller than window/kernel")), None));
    }
    let init = make_grid_init(rows, cols).map_err(|e| (e, None))?;
    let input = init.0.to_tensor();
    let base = centred_base(&init);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = GeneratorParams::init(&cfg.arch, &mut rng).map_err(|e| (e, None))?;
    let loss_target = LossTarget::new(target);
    let mut adam = AdamState::for_buffers(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..Default::default()
        },
        &params.buffers(),
    );
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut last_frame: Option<SpcvFrame> = None;

    for step in 0..cfg.steps {
        let fail = |e: Error, last: &Option<SpcvFrame>| (e, last.clone());
        let mut ev = evaluate(&params, &input, &base, cfg).map_err(|e| fail(e, &last_frame))?;
        let pts = points_of(ev.tape.value(ev.frame));
        let eps = epsilon_at(&cfg.metric, step, cfg.steps);
        let (dist, dgrad) = loss_target
            .loss_and_grad(&pts, &cfg.metric, eps)
            .map_err(|e| fail(e, &last_frame))?;
        let reg = ev.tape.value(ev.regularizer).data()[0];
        let loss = dist + reg;
        if !loss.is_finite() {
            return Err((
                Error::NonFinite {
                    context: "frame fit loss".into(),
                    step,
                },
                last_frame,
            ));
        }
        curve.push(loss);
        progress(step, loss);
        last_frame = Some(SpcvFrame::new(rows, cols, pts).map_err(|e| fail(e, &last_frame))?);
        // At an exact optimum Adam amplifies roundoff-level gradients into
        // full-size steps, so a converged fit must not keep stepping.
        if loss <= cfg.tolerance {
            break;
        }

        let dgrad_t = SpcvFrame::new(rows, cols, dgrad)
            .map_err(|e| fail(e, &last_frame))?
            .to_tensor();
        let grads = ev
            .tape
            .backward(&[(ev.frame, &dgrad_t), (ev.regularizer, &Tensor::scalar(1.0))])
            .map_err(|e| fail(e, &last_frame))?;
        let gg = GeneratorGrads::collect(&grads, ev.frame, &ev.params);
        adam.set_learning_rate(cfg.schedule.rate(cfg.learning_rate, step, cfg.steps));
        let g_bufs = gg.buffers();
        adam_step(&mut params.buffers_mut(), &g_bufs, &mut adam).map_err(|e| match e {
            Error::NonFinite { context, .. } => (Error::NonFinite { context, step }, last_frame.clone()),
            other => (other, last_frame.clone()),
        })?;
    }

    let ev = evaluate(&params, &input, &base, cfg).map_err(|e| (e, last_frame.clone()))?;
    let pts = points_of(ev.tape.value(ev.frame));
    let (dist, _) = loss_target
        .loss_and_grad(&pts, &cfg.metric, epsilon_at(&cfg.metric, cfg.steps, cfg.steps))
        .map_err(|e| (e, last_frame.clone()))?;
    let reg = ev.tape.value(ev.regularizer).data()[0];
    if !(dist + reg).is_finite() {
        return Err((
            Error::NonFinite {
                context: "frame fit loss".into(),
                step: cfg.steps,
            },
            last_frame,
        ));
    }
    let frame = SpcvFrame::new(rows, cols, pts).map_err(|e| (e, last_frame.clone()))?;
    Ok(FrameFit {
        frame,
        params,
        report: FitReport {
            loss_curve: curve,
            final_distance: dist,
            final_regularizer: reg,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradient_check;
    use crate::fixtures::plane;
    use crate::metrics::chamfer;
    use crate::quality::spatial_smoothness_ratio;
    use rand::Rng;

    fn random_frame(rows: usize, cols: usize, seed: u64) -> SpcvFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pixels = (0..rows * cols)
            .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            .collect();
        SpcvFrame::new(rows, cols, pixels).unwrap()
    }

    fn affine_frame(rows: usize, cols: usize) -> SpcvFrame {
        let mut px = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let (u, v) = (i as f64, j as f64);
                px.push([0.3 * u - 0.1 * v + 0.2, 0.05 * u + 0.4 * v, 0.2 * u + 0.1 * v - 1.0]);
            }
        }
        SpcvFrame::new(rows, cols, px).unwrap()
    }

    #[test]
    fn reproject_is_row_major() {
        let f = SpcvFrame::new(2, 2, vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
        let pc = reproject(&f);
        assert_eq!(pc.get(1), f.at(0, 1));
        assert_eq!(pc.get(2), f.at(1, 0));
        assert_eq!(SpcvFrame::regrid(&pc, 2, 2).unwrap(), f);
    }

    #[test]
    fn tensor_roundtrip() {
        let f = random_frame(4, 5, 1);
        assert_eq!(SpcvFrame::from_tensor(&f.to_tensor()).unwrap(), f);
    }

    #[test]
    fn grid_init_spans_unit_square() {
        let g = make_grid_init(3, 5).unwrap().0;
        assert_eq!(g.at(0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(g.at(2, 4), [1.0, 1.0, 0.0]);
        assert_eq!(g.at(1, 1), [0.5, 0.25, 0.0]);
    }

    #[test]
    fn plane_normals_are_constant() {
        let n = compute_normals(&affine_frame(5, 6)).unwrap();
        assert!(n.valid.iter().all(|&v| v));
        for p in &n.normals {
            for k in 0..3 {
                assert!((p[k] - n.normals[0][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collapsed_frame_has_no_valid_normals() {
        let f = SpcvFrame::new(3, 3, vec![[0.2, 0.1, 0.0]; 9]).unwrap();
        let n = compute_normals(&f).unwrap();
        assert!(n.valid.iter().all(|&v| !v));
        let cfg = FrameFitConfig::default();
        assert!(r_geo(&f, &n, &cfg).unwrap() < 1e-30);
    }

    #[test]
    fn r_geo_vanishes_on_affine_frames() {
        let f = affine_frame(7, 6);
        let cfg = FrameFitConfig::default();
        let n = compute_normals(&f).unwrap();
        assert!(r_geo(&f, &n, &cfg).unwrap() < 1e-24);
        assert!(r_geo_with_grad(&f, &cfg).unwrap().0 < 1e-24);
    }

    #[test]
    fn r_geo_tape_matches_loops() {
        for seed in 0..5 {
            let f = random_frame(6, 7, seed);
            let n = compute_normals(&f).unwrap();
            for (ls, ln) in [(1.0, 0.0), (1.0, 0.1), (0.0, 2.0)] {
                let cfg = FrameFitConfig {
                    lambda_s: ls,
                    lambda_n: ln,
                    ..Default::default()
                };
                let a = r_geo(&f, &n, &cfg).unwrap();
                let b = r_geo_with_grad(&f, &cfg).unwrap().0;
                assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn r_geo_window_five() {
        let f = random_frame(7, 8, 9);
        let cfg = FrameFitConfig {
            window: 5,
            ..Default::default()
        };
        let n = compute_normals(&f).unwrap();
        let a = r_geo(&f, &n, &cfg).unwrap();
        let b = r_geo_with_grad(&f, &cfg).unwrap().0;
        assert!((a - b).abs() <= 1e-10 * a, "{a} {b}");
    }

    #[test]
    fn r_geo_gradient_matches_finite_differences() {
        let f = random_frame(5, 5, 4);
        let report = gradient_check(|t, x| record_r_geo(t, x, 1.0, 0.5, 3), &f.to_tensor(), 1e-6, 1e-4).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn config_validation() {
        let bad = [
            FrameFitConfig { window: 4, ..Default::default() },
            FrameFitConfig { steps: 0, ..Default::default() },
            FrameFitConfig { lambda_s: -1.0, ..Default::default() },
            FrameFitConfig { learning_rate: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::Cosine { floor: 0.1, warmup: 0.0 };
        assert_eq!(s.rate(1.0, 0, 10), 1.0);
        assert!((s.rate(1.0, 10, 10) - 0.1).abs() < 1e-15);
        assert!((s.rate(1.0, 5, 10) - 0.55).abs() < 1e-15);
        let w = LrSchedule::Cosine { floor: 0.1, warmup: 0.1 };
        assert!((w.rate(1.0, 0, 100) - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(w.rate(1.0, 10, 100), 1.0);
    }

    fn small_cfg(steps: usize) -> FrameFitConfig {
        FrameFitConfig {
            steps,
            arch: GeneratorArch {
                hidden: 8,
                layers: 4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn planar_target_is_fit_exactly() {
        let target = plane(16, 16).unwrap();
        let fit = structurize_frame(&target, 16, 16, &small_cfg(100), 0).unwrap();
        let cd = chamfer(&reproject(&fit.frame), &target);
        assert!(cd <= 1e-6, "{cd}");
        assert!(spatial_smoothness_ratio(&fit.frame, 3).unwrap() >= 0.95);
    }

    #[test]
    fn converged_fit_stops_early() {
        let target = plane(8, 8).unwrap();
        let fit = structurize_frame(&target, 8, 8, &small_cfg(50), 0).unwrap();
        let curve = &fit.report.loss_curve;
        assert!(curve.len() < 50);
        assert!(*curve.last().unwrap() <= 1e-12);

        let cfg = FrameFitConfig {
            tolerance: 0.0,
            ..small_cfg(5)
        };
        let sphere = crate::fixtures::sphere(64, 0).unwrap();
        assert_eq!(structurize_frame(&sphere, 8, 8, &cfg, 0).unwrap().report.loss_curve.len(), 5);
    }

    #[test]
    fn fit_is_deterministic() {
        let target = crate::fixtures::sphere(256, 1).unwrap();
        let a = structurize_frame(&target, 16, 16, &small_cfg(30), 7).unwrap();
        let b = structurize_frame(&target, 16, 16, &small_cfg(30), 7).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.frame, b.frame);
    }

    #[test]
    fn fit_reduces_loss_on_sphere() {
        let target = crate::fixtures::sphere(256, 1).unwrap();
        let fit = structurize_frame(&target, 16, 16, &small_cfg(200), 0).unwrap();
        let curve = &fit.report.loss_curve;
        assert!(fit.report.final_loss() < 0.5 * curve[0]);
    }

    #[test]
    fn rejects_grid_smaller_than_window() {
        let target = plane(4, 4).unwrap();
        let cfg = FrameFitConfig {
            window: 5,
            ..small_cfg(1)
        };
        assert!(structurize_frame(&target, 4, 4, &cfg, 0).is_err());
    }
}
