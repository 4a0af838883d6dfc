use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::vec3::{dist2, Vec3};

/// Size guard for the cubic-time assignment solver.
pub const EMD_EXACT_MAX_POINTS: usize = 1024;

/// Exact EMD: `(1/n) * min_pi sum ||a_i - b_pi(i)||^2` over bijections.
pub fn emd_exact(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    optimal_assignment(a.points(), b.points()).map(|(cost, _)| cost)
}

/// Optimal bijection under squared Euclidean cost.
///
/// Returns the mean matched cost and `perm` with `a[i]` matched to `b[perm[i]]`.
pub fn optimal_assignment(a: &[Vec3], b: &[Vec3]) -> Result<(f64, Vec<usize>)> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::invalid(format!(
            "exact EMD needs equal sizes, got {} and {}",
            n,
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("exact EMD needs nonempty inputs"));
    }
    if n > EMD_EXACT_MAX_POINTS {
        return Err(Error::invalid(format!(
            "exact EMD limited to {EMD_EXACT_MAX_POINTS} points, got {n}"
        )));
    }
    let cost = |i: usize, j: usize| dist2(a[i], b[j]);

    // Shortest augmenting path Hungarian method with row/column potentials.
    // Index 0 is a sentinel column; rows and columns are 1-based below.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut matched_row = vec![0_usize; n + 1];
    let mut way = vec![0_usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost(r0 - 1, col - 1) - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched_row[col0] = matched_row[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for col in 1..=n {
        perm[matched_row[col] - 1] = col - 1;
    }
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    Ok((total / n as f64, perm))
}
