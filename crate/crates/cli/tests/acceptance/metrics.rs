//! Distances against brute-force and exhaustive oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcv_core::metrics::{chamfer, emd_exact, emd_sinkhorn, hausdorff, SinkhornConfig};
use spcv_core::vec3::Vec3;
use spcv_core::PointCloud;

use crate::{ensure, Outcome};

fn d2(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn min_d2(p: Vec3, set: &[Vec3]) -> f64 {
    set.iter().map(|&q| d2(p, q)).fold(f64::INFINITY, f64::min)
}

fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().map(|&p| min_d2(p, b)).sum::<f64>() / a.len() as f64
        + b.iter().map(|&q| min_d2(q, a)).sum::<f64>() / b.len() as f64
}

fn brute_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = a.iter().map(|&p| min_d2(p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|&q| min_d2(q, a)).fold(0.0, f64::max);
    ab.max(ba).sqrt()
}

/// Minimum mean matched cost over all n! bijections.
fn exhaustive_emd(a: &[Vec3], b: &[Vec3]) -> f64 {
    fn rec(a: &[Vec3], b: &[Vec3], used: &mut [bool], i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                rec(a, b, used, i + 1, acc + d2(a[i], b[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vec3> {
    let mut pts: Vec<Vec3> = (0..n)
        .map(|_| {
            [
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
            ]
        })
        .collect();
    // exact duplicates exercise tie handling
    if n > 3 && rng.gen_bool(0.2) {
        pts[1] = pts[0];
    }
    pts
}

fn pc(p: Vec<Vec3>) -> PointCloud {
    PointCloud::new(p).unwrap()
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut worst_cd = 0.0_f64;
    let mut worst_hd = 0.0_f64;
    for _ in 0..500 {
        let spread = [0.01, 1.0, 50.0][rng.gen_range(0..3)];
        let (na, nb) = (rng.gen_range(1..300), rng.gen_range(1..300));
        let (a, b) = (cloud(&mut rng, na, spread), cloud(&mut rng, nb, spread));
        let (cd, hd) = (brute_chamfer(&a, &b), brute_hausdorff(&a, &b));
        let (a, b) = (pc(a), pc(b));
        worst_cd = worst_cd.max((chamfer(&a, &b) - cd).abs() / cd.max(1.0));
        worst_hd = worst_hd.max((hausdorff(&a, &b) - hd).abs() / hd.max(1.0));
    }
    ensure(worst_cd <= 1e-12, || format!("chamfer off brute force by {worst_cd:e}"))?;
    ensure(worst_hd <= 1e-12, || format!("hausdorff off brute force by {worst_hd:e}"))?;

    let mut worst_emd = 0.0_f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let (a, b) = (cloud(&mut rng, n, 1.0), cloud(&mut rng, n, 1.0));
        let oracle = exhaustive_emd(&a, &b);
        let got = emd_exact(&pc(a), &pc(b)).map_err(|e| e.to_string())?;
        worst_emd = worst_emd.max((got - oracle).abs() / oracle.max(1.0));
    }
    ensure(worst_emd <= 1e-12, || format!("emd_exact off enumeration by {worst_emd:e}"))?;

    let cfg = SinkhornConfig::default();
    let mut worst_sk = 0.0_f64;
    for trial in 0..8 {
        let a = cloud(&mut rng, 128, 0.5);
        let mut b = cloud(&mut rng, 128, 0.5);
        if trial % 2 == 1 {
            // shifted copy: a transport plan with long matches
            let shift = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.2];
            b = a.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
        }
        let (a, b) = (pc(a), pc(b));
        let exact = emd_exact(&a, &b).map_err(|e| e.to_string())?;
        let (approx, _) = emd_sinkhorn(&a, &b, &cfg).map_err(|e| e.to_string())?;
        worst_sk = worst_sk.max((approx - exact).abs() / exact);
    }
    ensure(worst_sk <= 0.05, || format!("sinkhorn off exact EMD by {:.2}%", 100.0 * worst_sk))?;

    Ok(format!(
        "chamfer {worst_cd:.1e}, hausdorff {worst_hd:.1e} over 500 pairs; emd_exact {worst_emd:.1e} over 200 enumerations; sinkhorn worst {:.2}% over 8 pairs of 128",
        100.0 * worst_sk
    ))
}
