//! Every differentiable op against central differences, 100 random trials each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcv_core::autodiff::{gradient_check, GridAxis, Tape, Tensor, Var};
use spcv_core::frame::record_r_geo;
use spcv_core::metrics::{emd_sinkhorn, SinkhornConfig};
use spcv_core::sequence::{r_smooth_with_grad, KnnGraph};
use spcv_core::vec3::Vec3;
use spcv_core::{PointCloud, Result};

use crate::Outcome;

const TRIALS: usize = 100;
const TOL: f64 = 1e-4;
const H: f64 = 1e-6;

fn tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn grid(rng: &mut ChaCha8Rng, c: usize, min: usize) -> Tensor {
    let (h, w) = (rng.gen_range(min..min + 4), rng.gen_range(min..min + 4));
    tensor(rng, &[c, h, w])
}

/// Same relative measure as the tape checker, for functions outside the tape.
fn rel_err(fd: f64, ad: f64) -> f64 {
    (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-6)
}

type Op = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

/// One random (op, input) pair per call.
fn tape_case(name: &str, rng: &mut ChaCha8Rng) -> (Op, Tensor) {
    match name {
        "conv2d/input" | "conv2d/weight" | "conv2d/bias" => {
            let k = [1, 3, 5][rng.gen_range(0..3)];
            let (c_in, c_out) = (rng.gen_range(1..4), rng.gen_range(1..4));
            let x = grid(rng, c_in, k.max(3));
            let w = tensor(rng, &[c_out, c_in, k, k]);
            let b = tensor(rng, &[c_out]);
            match name {
                "conv2d/input" => (
                    Box::new(move |t: &mut Tape, v| {
                        let (w, b) = (t.leaf(w.clone())?, t.leaf(b.clone())?);
                        t.conv2d(v, w, b)
                    }),
                    x,
                ),
                "conv2d/weight" => (
                    Box::new(move |t: &mut Tape, v| {
                        let (x, b) = (t.leaf(x.clone())?, t.leaf(b.clone())?);
                        t.conv2d(x, v, b)
                    }),
                    w,
                ),
                _ => (
                    Box::new(move |t: &mut Tape, v| {
                        let (x, w) = (t.leaf(x.clone())?, t.leaf(w.clone())?);
                        t.conv2d(x, w, v)
                    }),
                    b,
                ),
            }
        }
        "sin" => {
            let freq = rng.gen_range(0.5..30.0);
            (Box::new(move |t: &mut Tape, v| t.sin(v, freq)), grid(rng, 2, 2))
        }
        "add" | "sub" | "mul" => {
            let x = grid(rng, 2, 2);
            let other = tensor(rng, x.shape());
            let name = name.to_string();
            (
                Box::new(move |t: &mut Tape, v| {
                    let o = t.leaf(other.clone())?;
                    match name.as_str() {
                        "add" => t.add(v, o),
                        "sub" => t.sub(o, v),
                        _ => t.mul(v, o),
                    }
                }),
                x,
            )
        }
        "mul/self" => (Box::new(|t: &mut Tape, v| t.mul(v, v)), grid(rng, 2, 2)),
        "scale" => {
            let c = rng.gen_range(-3.0..3.0);
            (Box::new(move |t: &mut Tape, v| t.scale(v, c)), grid(rng, 2, 2))
        }
        "mul_const" => {
            let x = grid(rng, 2, 2);
            let c: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            (Box::new(move |t: &mut Tape, v| t.mul_const(v, c.clone())), x)
        }
        "square" => (Box::new(|t: &mut Tape, v| t.square(v)), grid(rng, 2, 2)),
        "sum" => (Box::new(|t: &mut Tape, v| t.sum(v)), grid(rng, 3, 2)),
        "mean" => (Box::new(|t: &mut Tape, v| t.mean(v)), grid(rng, 3, 2)),
        "crop" => {
            let border = rng.gen_range(1..3);
            (Box::new(move |t: &mut Tape, v| t.crop(v, border)), grid(rng, 2, 2 * border + 1))
        }
        "window_mean" | "window_mean/weighted" => {
            let size = [3, 5][rng.gen_range(0..2)];
            let x = grid(rng, 3, size);
            let weights = (name == "window_mean/weighted").then(|| {
                (0..x.len() / 3)
                    .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..2.0) })
                    .collect::<Vec<f64>>()
            });
            (Box::new(move |t: &mut Tape, v| t.window_mean(v, size, weights.clone())), x)
        }
        "grid_diff/rows" => (Box::new(|t: &mut Tape, v| t.grid_diff(v, GridAxis::Rows)), grid(rng, 3, 2)),
        "grid_diff/cols" => (Box::new(|t: &mut Tape, v| t.grid_diff(v, GridAxis::Cols)), grid(rng, 3, 2)),
        "cross" => {
            let x = grid(rng, 3, 2);
            let other = tensor(rng, x.shape());
            (
                Box::new(move |t: &mut Tape, v| {
                    let o = t.leaf(other.clone())?;
                    let vv = t.square(v)?;
                    // both argument slots depend on v
                    let a = t.cross(v, o)?;
                    let b = t.cross(o, vv)?;
                    t.add(a, b)
                }),
                x,
            )
        }
        "normalize" => {
            // keep every pixel well away from the degenerate threshold
            let mut x = grid(rng, 3, 2);
            let hw = x.len() / 3;
            for p in 0..hw {
                x.data_mut()[p] += 2.0;
            }
            (Box::new(|t: &mut Tape, v| t.normalize(v, 1e-14).map(|(out, _)| out)), x)
        }
        "r_geo" => {
            let window = [3, 5][rng.gen_range(0..2)];
            let (ls, ln) = (rng.gen_range(0.1..2.0), rng.gen_range(0.0..1.0));
            // a bumpy height field keeps every normal well defined
            let (h, w) = (rng.gen_range(window..window + 4), rng.gen_range(window..window + 4));
            let mut data = vec![0.0; 3 * h * w];
            for i in 0..h {
                for j in 0..w {
                    let p = i * w + j;
                    data[p] = i as f64 / h as f64 + rng.gen_range(-0.02..0.02);
                    data[h * w + p] = j as f64 / w as f64 + rng.gen_range(-0.02..0.02);
                    data[2 * h * w + p] = rng.gen_range(-0.3..0.3);
                }
            }
            (
                Box::new(move |t: &mut Tape, v| record_r_geo(t, v, ls, ln, window)),
                Tensor::new(&[3, h, w], data).unwrap(),
            )
        }
        other => unreachable!("unknown op {other}"),
    }
}

const TAPE_OPS: [&str; 20] = [
    "conv2d/input",
    "conv2d/weight",
    "conv2d/bias",
    "sin",
    "add",
    "sub",
    "mul",
    "mul/self",
    "scale",
    "mul_const",
    "square",
    "sum",
    "mean",
    "crop",
    "window_mean",
    "window_mean/weighted",
    "grid_diff/rows",
    "grid_diff/cols",
    "cross",
    "normalize",
];

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
        .collect()
}

/// Worst relative error of `f`'s analytic gradient over every coordinate.
fn point_fd(points: &[Vec3], h: f64, f: impl Fn(&[Vec3]) -> (f64, Vec<Vec3>)) -> f64 {
    let (_, grad) = f(points);
    let mut probe = points.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..points.len() {
        for k in 0..3 {
            let orig = probe[i][k];
            probe[i][k] = orig + h;
            let plus = f(&probe).0;
            probe[i][k] = orig - h;
            let minus = f(&probe).0;
            probe[i][k] = orig;
            worst = worst.max(rel_err((plus - minus) / (2.0 * h), grad[i][k]));
        }
    }
    worst
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    let mut record = |name: &str, worst: f64| {
        summary.push(format!("{name}={worst:.1e}"));
        if !(worst <= TOL) {
            failures.push(format!("{name} max rel err {worst:e}"));
        }
    };

    for name in TAPE_OPS.iter().copied().chain(["r_geo"]) {
        let mut worst = 0.0_f64;
        for _ in 0..TRIALS {
            let (op, input) = tape_case(name, &mut rng);
            let report = gradient_check(op, &input, H, TOL).map_err(|e| format!("{name}: {e}"))?;
            worst = worst.max(report.max_rel_error);
        }
        record(name, worst);
    }

    let mut worst = 0.0_f64;
    for _ in 0..TRIALS {
        let n = rng.gen_range(4..40);
        let base = random_points(&mut rng, n);
        let k = rng.gen_range(1..n.min(9));
        let graph = KnnGraph::build(&base, k, 1e-8).unwrap();
        let delta = random_points(&mut rng, n);
        worst = worst.max(point_fd(&delta, H, |d| r_smooth_with_grad(d, &graph).unwrap()));
    }
    record("r_smooth", worst);

    // Moderate blur so the potentials converge to machine precision; the
    // envelope gradient is exact only at converged potentials.
    let cfg = SinkhornConfig {
        epsilon: 0.05,
        epsilon_start: 0.05,
        iterations: 20_000,
        tolerance: 1e-15,
    };
    let mut worst = 0.0_f64;
    for _ in 0..TRIALS {
        let (na, nb) = (rng.gen_range(2..10), rng.gen_range(2..10));
        let a = random_points(&mut rng, na);
        let b = PointCloud::new(random_points(&mut rng, nb)).unwrap();
        worst = worst.max(point_fd(&a, 1e-5, |p| {
            emd_sinkhorn(&PointCloud::new(p.to_vec()).unwrap(), &b, &cfg).unwrap()
        }));
    }
    record("emd_sinkhorn", worst);

    if failures.is_empty() {
        Ok(format!("{TRIALS} trials per op, tol {TOL:e}: {}", summary.join(" ")))
    } else {
        Err(failures.join("; "))
    }
}
