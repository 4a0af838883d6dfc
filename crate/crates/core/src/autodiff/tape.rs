//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! Every op appends a node holding its output value and whatever it needs
//! for the backward sweep. `Tape::backward` walks the nodes in reverse,
//! accumulating gradients; it may run once per tape.

use super::conv::{self, ConvGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    Sin {
        input: Var,
        freq: f64,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Crop {
        input: Var,
        border: usize,
    },
    WindowMean {
        input: Var,
        size: usize,
        weights: Vec<f64>,
    },
    GridDiff {
        input: Var,
        axis: GridAxis,
    },
    Cross(Var, Var),
    Normalize {
        input: Var,
        valid: Vec<bool>,
    },
}

/// Spatial axis of a CxHxW tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAxis {
    Rows,
    Cols,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(&self.shapes[v.0], g.clone()).expect("gradient shape"))
    }

    /// Gradient of `v`, or zeros of its shape when nothing flowed into it.
    pub fn get_or_zero(&self, v: Var) -> Tensor {
        self.get(v).unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn raw(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("forward op #{}", self.nodes.len()),
                step: 0,
            });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::invalid(format!("shape mismatch {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let t = self.value(a);
        let out = Tensor::new(t.shape(), t.data().iter().map(|&x| f(x)).collect())?;
        self.push(out, op)
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.shape(), data)?;
        self.push(out, op)
    }

    /// A leaf (input, parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf)
    }

    /// Same-size convolution with reflection padding.
    /// `input` is CinxHxW, `weight` CoutxCinxKxK, `bias` Cout.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (c_in, h, w) = self.value(input).chw()?;
        let ws = self.value(weight).shape().to_vec();
        let [c_out, wc_in, k, k2] = ws[..] else {
            return Err(Error::invalid(format!("conv weight must be rank 4, got {ws:?}")));
        };
        if wc_in != c_in || k != k2 || k % 2 == 0 {
            return Err(Error::invalid(format!(
                "conv weight {ws:?} incompatible with {c_in} input channels"
            )));
        }
        if self.value(bias).shape() != [c_out] {
            return Err(Error::invalid("conv bias length must equal output channels"));
        }
        if h <= k / 2 || w <= k / 2 || h < k || w < k {
            return Err(Error::invalid(format!("grid {h}x{w} smaller than kernel {k}")));
        }
        let geom = ConvGeom {
            c_in,
            c_out,
            h,
            w,
            k,
        };
        let cols = conv::im2col(&geom, self.value(input).data());
        let out = conv::forward(&geom, &cols, self.value(weight).data(), self.value(bias).data());
        let out = Tensor::new(&[c_out, h, w], out)?;
        self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            },
        )
    }

    pub fn sin(&mut self, input: Var, freq: f64) -> Result<Var> {
        self.map(input, Op::Sin { input, freq }, |x| (freq * x).sin())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map(a, Op::Scale(a, c), |x| c * x)
    }

    /// Elementwise product with a constant (non-differentiated) array.
    pub fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Result<Var> {
        if c.len() != self.value(a).len() {
            return Err(Error::invalid("constant factor length mismatch"));
        }
        let t = self.value(a);
        let data = t.data().iter().zip(&c).map(|(x, y)| x * y).collect();
        let out = Tensor::new(t.shape(), data)?;
        self.push(out, Op::MulConst(a, c))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.map(a, Op::Square(a), |x| x * x)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Drop `border` pixels from every side of a CxHxW tensor.
    pub fn crop(&mut self, input: Var, border: usize) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        if 2 * border >= h || 2 * border >= w {
            return Err(Error::invalid("crop border larger than the grid"));
        }
        let (oh, ow) = (h - 2 * border, w - 2 * border);
        let src = self.value(input).data();
        let mut out = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for y in 0..oh {
                let start = (ch * h + y + border) * w + border;
                out.extend_from_slice(&src[start..start + ow]);
            }
        }
        let out = Tensor::new(&[c, oh, ow], out)?;
        self.push(out, Op::Crop { input, border })
    }

    /// Mean over every complete `size x size` window (stride 1, no padding).
    ///
    /// With `weights` (one per pixel, shared across channels) the mean is
    /// weighted; windows whose weights sum to zero produce zero.
    pub fn window_mean(&mut self, input: Var, size: usize, weights: Option<Vec<f64>>) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        if size == 0 || size > h || size > w {
            return Err(Error::invalid(format!("window {size} does not fit grid {h}x{w}")));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; h * w]);
        if weights.len() != h * w {
            return Err(Error::invalid("window weights must have one entry per pixel"));
        }
        let (oh, ow) = (h - size + 1, w - size + 1);
        let src = self.value(input).data();
        let mut out = vec![0.0; c * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let mut wsum = 0.0;
                for dy in 0..size {
                    for dx in 0..size {
                        wsum += weights[(y + dy) * w + x + dx];
                    }
                }
                if wsum == 0.0 {
                    continue;
                }
                for ch in 0..c {
                    let mut s = 0.0;
                    for dy in 0..size {
                        for dx in 0..size {
                            let p = (y + dy) * w + x + dx;
                            s += weights[p] * src[ch * h * w + p];
                        }
                    }
                    out[(ch * oh + y) * ow + x] = s / wsum;
                }
            }
        }
        let out = Tensor::new(&[c, oh, ow], out)?;
        self.push(out, Op::WindowMean { input, size, weights })
    }

    /// Finite-difference derivative along a grid axis: central in the
    /// interior, one-sided on the first and last row/column. Unit spacing.
    pub fn grid_diff(&mut self, input: Var, axis: GridAxis) -> Result<Var> {
        let (c, h, w) = self.value(input).chw()?;
        if h < 2 || w < 2 {
            return Err(Error::invalid("grid_diff needs at least 2x2 pixels"));
        }
        let src = self.value(input).data();
        let mut out = vec![0.0; c * h * w];
        for_each_diff_tap(c, h, w, axis, |dst, src_idx, coef| out[dst] += coef * src[src_idx]);
        let out = Tensor::new(&[c, h, w], out)?;
        self.push(out, Op::GridDiff { input, axis })
    }

    /// Per-pixel cross product of two 3xHxW tensors.
    pub fn cross(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b)?;
        let (c, h, w) = self.value(a).chw()?;
        if c != 3 {
            return Err(Error::invalid("cross product needs 3 channels"));
        }
        let hw = h * w;
        let (ta, tb) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; 3 * hw];
        for p in 0..hw {
            let u = [ta[p], ta[hw + p], ta[2 * hw + p]];
            let v = [tb[p], tb[hw + p], tb[2 * hw + p]];
            let r = crate::vec3::cross(u, v);
            for k in 0..3 {
                out[k * hw + p] = r[k];
            }
        }
        let out = Tensor::new(&[3, h, w], out)?;
        self.push(out, Op::Cross(a, b))
    }

    /// Per-pixel unit normalization of a 3xHxW tensor. Pixels whose norm is
    /// at most `min_norm` are degenerate: they output zero and pass no gradient.
    /// Returns the output and the validity mask.
    pub fn normalize(&mut self, input: Var, min_norm: f64) -> Result<(Var, Vec<bool>)> {
        let (c, h, w) = self.value(input).chw()?;
        if c != 3 {
            return Err(Error::invalid("normalize needs 3 channels"));
        }
        let hw = h * w;
        let src = self.value(input).data();
        let mut out = vec![0.0; 3 * hw];
        let mut valid = vec![false; hw];
        for p in 0..hw {
            let v = [src[p], src[hw + p], src[2 * hw + p]];
            let n = crate::vec3::norm(v);
            if n > min_norm {
                valid[p] = true;
                for k in 0..3 {
                    out[k * hw + p] = v[k] / n;
                }
            }
        }
        let out = Tensor::new(&[3, h, w], out)?;
        let var = self.push(
            out,
            Op::Normalize {
                input,
                valid: valid.clone(),
            },
        )?;
        Ok((var, valid))
    }

    /// Reverse sweep seeded with `d(loss)/d(var)` for each `(var, grad)`.
    ///
    /// A tape supports a single backward pass; a second call is a usage error.
    pub fn backward(&mut self, seeds: &[(Var, &Tensor)]) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.consumed = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        for (v, g) in seeds {
            if g.shape() != self.value(*v).shape() {
                return Err(Error::invalid(format!(
                    "seed gradient shape {:?} does not match node shape {:?}",
                    g.shape(),
                    self.value(*v).shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    context: "seed gradient".into(),
                    step: 0,
                });
            }
            accumulate(&mut grads, *v, g.data());
        }
        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
                cols,
            } => {
                let (d_in, d_w, d_b) = conv::backward(geom, cols, self.value(*weight).data(), g, true);
                accumulate(grads, *weight, &d_w);
                accumulate(grads, *bias, &d_b);
                if let Some(d_in) = d_in {
                    accumulate(grads, *input, &d_in);
                }
            }
            Op::Sin { input, freq } => {
                let x = self.value(*input).data();
                let d: Vec<f64> = x.iter().zip(g).map(|(&x, &g)| g * freq * (freq * x).cos()).collect();
                accumulate(grads, *input, &d);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                accumulate(grads, *b, &neg);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let da: Vec<f64> = g.iter().zip(vb).map(|(g, y)| g * y).collect();
                let db: Vec<f64> = g.iter().zip(va).map(|(g, x)| g * x).collect();
                accumulate(grads, *a, &da);
                accumulate(grads, *b, &db);
            }
            Op::Scale(a, c) => {
                let d: Vec<f64> = g.iter().map(|g| g * c).collect();
                accumulate(grads, *a, &d);
            }
            Op::MulConst(a, c) => {
                let d: Vec<f64> = g.iter().zip(c).map(|(g, c)| g * c).collect();
                accumulate(grads, *a, &d);
            }
            Op::Square(a) => {
                let x = self.value(*a).data();
                let d: Vec<f64> = g.iter().zip(x).map(|(g, x)| 2.0 * g * x).collect();
                accumulate(grads, *a, &d);
            }
            Op::Sum(a) => {
                let d = vec![g[0]; self.value(*a).len()];
                accumulate(grads, *a, &d);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let d = vec![g[0] / n as f64; n];
                accumulate(grads, *a, &d);
            }
            Op::Crop { input, border } => {
                let (c, h, w) = self.value(*input).chw().expect("crop input");
                let (oh, ow) = (h - 2 * border, w - 2 * border);
                let mut d = vec![0.0; c * h * w];
                for ch in 0..c {
                    for y in 0..oh {
                        let dst = (ch * h + y + border) * w + border;
                        let src = (ch * oh + y) * ow;
                        d[dst..dst + ow].copy_from_slice(&g[src..src + ow]);
                    }
                }
                accumulate(grads, *input, &d);
            }
            Op::WindowMean { input, size, weights } => {
                let (c, h, w) = self.value(*input).chw().expect("window input");
                let (oh, ow) = (h - size + 1, w - size + 1);
                let mut d = vec![0.0; c * h * w];
                for y in 0..oh {
                    for x in 0..ow {
                        let mut wsum = 0.0;
                        for dy in 0..*size {
                            for dx in 0..*size {
                                wsum += weights[(y + dy) * w + x + dx];
                            }
                        }
                        if wsum == 0.0 {
                            continue;
                        }
                        for ch in 0..c {
                            let go = g[(ch * oh + y) * ow + x] / wsum;
                            for dy in 0..*size {
                                for dx in 0..*size {
                                    let p = (y + dy) * w + x + dx;
                                    d[ch * h * w + p] += weights[p] * go;
                                }
                            }
                        }
                    }
                }
                accumulate(grads, *input, &d);
            }
            Op::GridDiff { input, axis } => {
                let (c, h, w) = self.value(*input).chw().expect("diff input");
                let mut d = vec![0.0; c * h * w];
                for_each_diff_tap(c, h, w, *axis, |dst, src, coef| d[src] += coef * g[dst]);
                accumulate(grads, *input, &d);
            }
            Op::Cross(a, b) => {
                let (_, h, w) = self.value(*a).chw().expect("cross input");
                let hw = h * w;
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                let mut da = vec![0.0; 3 * hw];
                let mut db = vec![0.0; 3 * hw];
                for p in 0..hw {
                    let u = [ta[p], ta[hw + p], ta[2 * hw + p]];
                    let v = [tb[p], tb[hw + p], tb[2 * hw + p]];
                    let go = [g[p], g[hw + p], g[2 * hw + p]];
                    // d(u x v) . go: grad_u = v x go, grad_v = go x u
                    let gu = crate::vec3::cross(v, go);
                    let gv = crate::vec3::cross(go, u);
                    for k in 0..3 {
                        da[k * hw + p] = gu[k];
                        db[k * hw + p] = gv[k];
                    }
                }
                accumulate(grads, *a, &da);
                accumulate(grads, *b, &db);
            }
            Op::Normalize { input, valid } => {
                let (_, h, w) = self.value(*input).chw().expect("normalize input");
                let hw = h * w;
                let x = self.value(*input).data();
                let y = node.value.data();
                let mut d = vec![0.0; 3 * hw];
                for p in 0..hw {
                    if !valid[p] {
                        continue;
                    }
                    let v = [x[p], x[hw + p], x[2 * hw + p]];
                    let n = crate::vec3::norm(v);
                    let yn = [y[p], y[hw + p], y[2 * hw + p]];
                    let go = [g[p], g[hw + p], g[2 * hw + p]];
                    let proj = crate::vec3::dot(yn, go);
                    for k in 0..3 {
                        d[k * hw + p] = (go[k] - proj * yn[k]) / n;
                    }
                }
                accumulate(grads, *input, &d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Enumerate `(output index, input index, coefficient)` of the linear
/// finite-difference operator.
fn for_each_diff_tap(c: usize, h: usize, w: usize, axis: GridAxis, mut f: impl FnMut(usize, usize, f64)) {
    let (n, stride) = match axis {
        GridAxis::Rows => (h, w),
        GridAxis::Cols => (w, 1),
    };
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let pos = match axis {
                    GridAxis::Rows => y,
                    GridAxis::Cols => x,
                };
                let here = (ch * h + y) * w + x;
                let base = here - pos * stride;
                let (lo, hi, coef) = if pos == 0 {
                    (0, 1, 1.0)
                } else if pos == n - 1 {
                    (n - 2, n - 1, 1.0)
                } else {
                    (pos - 1, pos + 1, 0.5)
                };
                f(here, base + hi * stride, coef);
                f(here, base + lo * stride, -coef);
            }
        }
    }
}
