//! Both regularizers vanish exactly where they should and nowhere else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcv_core::frame::{compute_normals, r_geo, r_geo_with_grad, FrameFitConfig, SpcvFrame};
use spcv_core::sequence::{r_smooth, KnnGraph};
use spcv_core::vec3::Vec3;

use crate::{ensure, Outcome};

const TRIALS: usize = 1000;

/// `p(i, j) = o + i*a + j*b` with random, non-parallel `a`, `b`.
fn affine_frame(rng: &mut ChaCha8Rng) -> SpcvFrame {
    let (rows, cols) = (rng.gen_range(3..12), rng.gen_range(3..12));
    let mut v = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let (o, a, mut b) = (v(), v(), v());
    while {
        let c = spcv_core::vec3::cross(a, b);
        spcv_core::vec3::norm(c) < 0.1
    } {
        b = v();
    }
    let px = (0..rows * cols)
        .map(|p| {
            let (i, j) = ((p / cols) as f64, (p % cols) as f64);
            [
                o[0] + i * a[0] + j * b[0],
                o[1] + i * a[1] + j * b[1],
                o[2] + i * a[2] + j * b[2],
            ]
        })
        .collect();
    SpcvFrame::new(rows, cols, px).unwrap()
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = FrameFitConfig {
        lambda_s: 1.0,
        lambda_n: 0.1,
        ..Default::default()
    };

    // Window means of affine data equal the centre only up to roundoff, so
    // "zero" is judged against the scale of the coordinates.
    let mut worst_zero = 0.0_f64;
    let mut weakest_positive = f64::INFINITY;
    for _ in 0..TRIALS {
        let frame = affine_frame(&mut rng);
        let scale: f64 = frame.pixels().iter().flatten().map(|v| v * v).fold(1.0, f64::max);
        let zero = r_geo(&frame, &compute_normals(&frame).unwrap(), &cfg).unwrap();
        let (zero_tape, _) = r_geo_with_grad(&frame, &cfg).unwrap();
        worst_zero = worst_zero.max(zero.max(zero_tape) / scale);

        let mut bumped = frame.clone();
        let (rows, cols) = bumped.dims();
        let p = rng.gen_range(0..rows * cols);
        let k = rng.gen_range(0..3);
        bumped.pixels_mut()[p][k] += rng.gen_range(1e-3..1e-1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let pos = r_geo(&bumped, &compute_normals(&bumped).unwrap(), &cfg).unwrap();
        let (pos_tape, _) = r_geo_with_grad(&bumped, &cfg).unwrap();
        weakest_positive = weakest_positive.min(pos.min(pos_tape) / scale);
    }
    ensure(worst_zero <= 1e-24, || format!("r_geo on affine frames reached {worst_zero:e}"))?;
    ensure(weakest_positive > 1e-12, || {
        format!("r_geo on a perturbed frame only {weakest_positive:e}")
    })?;

    let mut smooth_zero = 0.0_f64;
    let mut smooth_positive = f64::INFINITY;
    for _ in 0..TRIALS {
        let n = rng.gen_range(3..60);
        let base: Vec<Vec3> = (0..n)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let graph = KnnGraph::build(&base, rng.gen_range(1..n), 1e-8).unwrap();
        let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let mut field = vec![c; n];
        smooth_zero = smooth_zero.max(r_smooth(&field, &graph).unwrap());
        let i = rng.gen_range(0..n);
        field[i][rng.gen_range(0..3)] += rng.gen_range(1e-3..1e-1);
        smooth_positive = smooth_positive.min(r_smooth(&field, &graph).unwrap());
    }
    ensure(smooth_zero == 0.0, || format!("r_smooth on constant fields reached {smooth_zero:e}"))?;
    ensure(smooth_positive > 0.0, || "r_smooth vanished on a perturbed field".into())?;

    Ok(format!(
        "{TRIALS} trials each: affine r_geo <= {worst_zero:.1e}, perturbed >= {weakest_positive:.1e}; constant r_smooth = 0, perturbed >= {smooth_positive:.1e}"
    ))
}
