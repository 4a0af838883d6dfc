//! Reverse-mode vs. central-difference comparison.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of [`gradient_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat input index where the worst error occurred.
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Absolute floor in the relative-error denominator, so entries whose true
/// gradient is ~0 are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Fixed, non-uniform projection weights turning a tensor output into a scalar.
fn projection(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + 0.5 * (1.7 * i as f64).sin()).collect()
}

fn scalar_of(op: &impl Fn(&mut Tape, Var) -> Result<Var>, input: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone())?;
    let y = op(&mut tape, x)?;
    let w = projection(tape.value(y).len());
    Ok(tape.value(y).data().iter().zip(&w).map(|(a, b)| a * b).sum())
}

/// Compare the tape's gradient of `sum(w * op(input))` against central
/// differences with step `h`. `w` is a fixed pseudo-random projection.
pub fn gradient_check(
    op: impl Fn(&mut Tape, Var) -> Result<Var>,
    input: &Tensor,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(input.clone())?;
    let y = op(&mut tape, x)?;
    let seed = Tensor::new(tape.value(y).shape(), projection(tape.value(y).len()))?;
    let grads = tape.backward(&[(y, &seed)])?;
    let analytic = grads.get_or_zero(x);

    let mut worst = 0.0_f64;
    let mut worst_index = 0;
    let mut probe = input.clone();
    for i in 0..input.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = scalar_of(&op, &probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = scalar_of(&op, &probe)?;
        probe.data_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let ad = analytic.data()[i];
        let err = (fd - ad).abs() / fd.abs().max(ad.abs()).max(REL_FLOOR);
        if err > worst {
            worst = err;
            worst_index = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        worst_index,
        tolerance: tol,
        passed: worst <= tol,
    })
}
