//! Same-size 2D convolution with reflection padding, via im2col + GEMM.

/// Mirror index `i` into `[0, n)` without repeating the edge sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Shape bookkeeping for one convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn pixels(&self) -> usize {
        self.h * self.w
    }

    /// For each `(row, pixel)` of the column matrix, the flat input index it reads.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let pad = (self.k / 2) as isize;
        let (h, w, k) = (self.h, self.w, self.k);
        let hw = self.pixels();
        for c in 0..self.c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let base = row * hw;
                    for y in 0..h {
                        let sy = reflect(y as isize + ky as isize - pad, h);
                        let src_row = (c * h + sy) * w;
                        for x in 0..w {
                            let sx = reflect(x as isize + kx as isize - pad, w);
                            f(base + y * w + x, src_row + sx);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn im2col(g: &ConvGeom, input: &[f64]) -> Vec<f64> {
    let mut cols = vec![0.0; g.rows() * g.pixels()];
    g.for_each_tap(|dst, src| cols[dst] = input[src]);
    cols
}

/// `out = weight (c_out x rows) * cols (rows x hw) + bias`.
pub(crate) fn forward(g: &ConvGeom, cols: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let hw = g.pixels();
    let mut out = vec![0.0; g.c_out * hw];
    for (o, chunk) in out.chunks_mut(hw).enumerate() {
        chunk.iter_mut().for_each(|v| *v = bias[o]);
    }
    gemm(
        g.c_out,
        g.rows(),
        hw,
        weight,
        (g.rows() as isize, 1),
        cols,
        (hw as isize, 1),
        &mut out,
        1.0,
    );
    out
}

/// Gradients of a convolution given the upstream gradient `d_out`.
/// Returns `(d_input, d_weight, d_bias)`.
pub(crate) fn backward(
    g: &ConvGeom,
    cols: &[f64],
    weight: &[f64],
    d_out: &[f64],
    want_input: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let hw = g.pixels();
    let rows = g.rows();
    let d_bias: Vec<f64> = d_out.chunks(hw).map(|c| c.iter().sum()).collect();
    // d_weight = d_out (c_out x hw) * cols^T (hw x rows)
    let mut d_weight = vec![0.0; g.c_out * rows];
    gemm(
        g.c_out,
        hw,
        rows,
        d_out,
        (hw as isize, 1),
        cols,
        (1, hw as isize),
        &mut d_weight,
        0.0,
    );
    let d_input = want_input.then(|| {
        // d_cols = weight^T (rows x c_out) * d_out (c_out x hw)
        let mut d_cols = vec![0.0; rows * hw];
        gemm(
            rows,
            g.c_out,
            hw,
            weight,
            (1, rows as isize),
            d_out,
            (hw as isize, 1),
            &mut d_cols,
            0.0,
        );
        let mut d_in = vec![0.0; g.c_in * hw];
        g.for_each_tap(|src, dst| d_in[dst] += d_cols[src]);
        d_in
    });
    (d_input, d_weight, d_bias)
}

/// `c (m x n, row-major) = a (m x k) * b (k x n) + beta * c`, with explicit
/// (row, column) strides for `a` and `b`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the strides can produce.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
