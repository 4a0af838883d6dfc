//! Debiased entropic optimal transport (Sinkhorn divergence) between uniform
//! point clouds under squared Euclidean cost.
//!
//! `S(A, B) = OT(A, B) - OT(A, A)/2 - OT(B, B)/2`, where each `OT` is the
//! entropic dual value at the converged potentials. The self terms remove the
//! entropic bias, so `S(A, A) = 0` and `S -> EMD` as epsilon shrinks.

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::vec3::{dist2, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    /// Final blur.
    pub epsilon: f64,
    /// First blur of the annealing schedule; equal to `epsilon` disables annealing.
    pub epsilon_start: f64,
    /// Iteration cap per annealing stage.
    pub iterations: usize,
    /// Early stop once the L1 row-marginal violation drops below this.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            epsilon_start: 0.1,
            iterations: 500,
            tolerance: 1e-9,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("sinkhorn epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.epsilon_start >= self.epsilon && self.epsilon_start.is_finite()) {
            return Err(Error::invalid("sinkhorn epsilon_start must be >= epsilon"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("sinkhorn iterations must be >= 1"));
        }
        Ok(())
    }

    /// Geometric schedule from `epsilon_start` down to `epsilon`, halving each stage.
    fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut eps = self.epsilon_start;
        while eps > self.epsilon * (1.0 + 1e-12) {
            out.push(eps);
            eps *= 0.5;
        }
        out.push(self.epsilon);
        out
    }
}

struct Problem {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    log_a: f64,
    log_b: f64,
}

impl Problem {
    fn new(a: &[Vec3], b: &[Vec3]) -> Self {
        let mut cost = Vec::with_capacity(a.len() * b.len());
        for &p in a {
            for &q in b {
                cost.push(dist2(p, q));
            }
        }
        Self {
            n: a.len(),
            m: b.len(),
            cost,
            log_a: -(a.len() as f64).ln(),
            log_b: -(b.len() as f64).ln(),
        }
    }

    fn update_f(&self, eps: f64, f: &mut [f64], g: &[f64], buf: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            for j in 0..self.m {
                buf[j] = (g[j] - row[j]) / eps;
            }
            f[i] = -eps * (self.log_b + log_sum_exp(&buf[..self.m]));
        }
    }

    fn update_g(&self, eps: f64, f: &[f64], g: &mut [f64], col_acc: &mut [f64], col_max: &mut [f64]) {
        // column-wise log-sum-exp via a running max to keep row-major access
        col_max.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            for j in 0..self.m {
                let z = (f[i] - row[j]) / eps;
                if z > col_max[j] {
                    col_max[j] = z;
                }
            }
        }
        col_acc.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.n {
            let row = &self.cost[i * self.m..(i + 1) * self.m];
            for j in 0..self.m {
                col_acc[j] += ((f[i] - row[j]) / eps - col_max[j]).exp();
            }
        }
        for j in 0..self.m {
            g[j] = -eps * (self.log_a + col_max[j] + col_acc[j].ln());
        }
    }

    fn dual(&self, f: &[f64], g: &[f64]) -> f64 {
        let a = (self.log_a).exp();
        let b = (self.log_b).exp();
        a * f.iter().sum::<f64>() + b * g.iter().sum::<f64>()
    }

    fn plan_entry(&self, eps: f64, f: &[f64], g: &[f64], i: usize, j: usize) -> f64 {
        (self.log_a + self.log_b + (f[i] + g[j] - self.cost[i * self.m + j]) / eps).exp()
    }

    fn row_violation(&self, eps: f64, f: &[f64], g: &[f64]) -> f64 {
        let a = self.log_a.exp();
        (0..self.n)
            .map(|i| {
                let s: f64 = (0..self.m).map(|j| self.plan_entry(eps, f, g, i, j)).sum();
                (s - a).abs()
            })
            .sum()
    }

    /// Annealed solve; returns the final potentials.
    fn solve(&self, cfg: &SinkhornConfig) -> (Vec<f64>, Vec<f64>) {
        let mut f = vec![0.0; self.n];
        let mut g = vec![0.0; self.m];
        let mut buf = vec![0.0; self.m];
        let mut col_acc = vec![0.0; self.m];
        let mut col_max = vec![0.0; self.m];
        for eps in cfg.schedule() {
            for it in 0..cfg.iterations {
                self.update_f(eps, &mut f, &g, &mut buf);
                self.update_g(eps, &f, &mut g, &mut col_acc, &mut col_max);
                if it % 10 == 9 && self.row_violation(eps, &f, &g) < cfg.tolerance {
                    break;
                }
            }
        }
        (f, g)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Entropic OT between `a` and `b` plus `d/da` (and `d/db` when asked).
fn ot_with_grads(a: &[Vec3], b: &[Vec3], cfg: &SinkhornConfig, want_b: bool) -> (f64, Vec<Vec3>, Vec<Vec3>) {
    let prob = Problem::new(a, b);
    let (f, g) = prob.solve(cfg);
    let eps = cfg.epsilon;
    let mut ga = vec![[0.0; 3]; a.len()];
    let mut gb = if want_b { vec![[0.0; 3]; b.len()] } else { Vec::new() };
    for i in 0..prob.n {
        for j in 0..prob.m {
            let p = prob.plan_entry(eps, &f, &g, i, j);
            if p == 0.0 {
                continue;
            }
            for k in 0..3 {
                let d = 2.0 * p * (a[i][k] - b[j][k]);
                ga[i][k] += d;
                if want_b {
                    gb[j][k] -= d;
                }
            }
        }
    }
    (prob.dual(&f, &g), ga, gb)
}

/// Sinkhorn divergence between `a` and `b` and its gradient with respect to `a`.
///
/// The gradient is the barycentric displacement `2 * sum_j P_ij (a_i - b_j)`
/// minus the matching self-transport term.
pub fn emd_sinkhorn(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<(f64, Vec<Vec3>)> {
    cfg.validate()?;
    let (ab, grad_ab, _) = ot_with_grads(a.points(), b.points(), cfg, false);
    let (aa, grad_aa_first, grad_aa_second) = ot_with_grads(a.points(), a.points(), cfg, true);
    let (bb, _, _) = ot_with_grads(b.points(), b.points(), cfg, false);
    let cost = ab - 0.5 * aa - 0.5 * bb;
    let grad = grad_ab
        .iter()
        .zip(grad_aa_first.iter().zip(&grad_aa_second))
        .map(|(g, (s1, s2))| {
            [
                g[0] - 0.5 * (s1[0] + s2[0]),
                g[1] - 0.5 * (s1[1] + s2[1]),
                g[2] - 0.5 * (s1[2] + s2[2]),
            ]
        })
        .collect();
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            context: "sinkhorn cost".into(),
            step: 0,
        });
    }
    Ok((cost, grad))
}

/// Entropic dual value `OT(a, b)` after each of `iterations` un-annealed
/// Sinkhorn sweeps at fixed `epsilon`.
pub fn sinkhorn_dual_trace(a: &PointCloud, b: &PointCloud, epsilon: f64, iterations: usize) -> Vec<f64> {
    let prob = Problem::new(a.points(), b.points());
    let mut f = vec![0.0; prob.n];
    let mut g = vec![0.0; prob.m];
    let mut buf = vec![0.0; prob.m];
    let mut col_acc = vec![0.0; prob.m];
    let mut col_max = vec![0.0; prob.m];
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        prob.update_f(epsilon, &mut f, &g, &mut buf);
        prob.update_g(epsilon, &f, &mut g, &mut col_acc, &mut col_max);
        out.push(prob.dual(&f, &g));
    }
    out
}
