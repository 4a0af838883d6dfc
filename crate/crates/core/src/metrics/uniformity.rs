//! Normalized uniformity coefficient over Euclidean disks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{farthest_point_sample, PointCloud};
use crate::index::SpatialIndex;
use crate::vec3::Vec3;

/// Disk radii, as fractions of the unit-box diagonal, averaged by the fidelity report.
pub const MNUC_DISK_FRACTIONS: [f64; 5] = [0.004, 0.006, 0.008, 0.010, 0.012];

/// Standard deviation over mean of the point counts inside disks of radius
/// `radius` around each of `centers`. Zero when every disk is empty.
pub fn nuc_at(index: &SpatialIndex, centers: &[Vec3], radius: f64) -> f64 {
    if centers.is_empty() {
        return 0.0;
    }
    let counts: Vec<f64> = centers
        .iter()
        .map(|&c| index.count_within(c, radius) as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn disk_centers(pc: &PointCloud, num_disks: usize, seed: u64) -> Result<Vec<Vec3>> {
    if num_disks == 0 {
        return Err(Error::invalid("num_disks must be positive"));
    }
    let m = num_disks.min(pc.len());
    let start = ChaCha8Rng::seed_from_u64(seed).gen_range(0..pc.len());
    let ids = farthest_point_sample(pc, m, start)?;
    Ok(ids.into_iter().map(|i| pc.get(i)).collect())
}

/// NUC for one disk size; disks are seeded by farthest point sampling from a
/// seed-chosen start point.
pub fn nuc(pc: &PointCloud, disk_fraction: f64, num_disks: usize, seed: u64) -> Result<f64> {
    mnuc(pc, &[disk_fraction], num_disks, seed)
}

/// Mean NUC over several disk sizes (fractions of the unit-box diagonal).
pub fn mnuc(pc: &PointCloud, disk_fractions: &[f64], num_disks: usize, seed: u64) -> Result<f64> {
    if disk_fractions.is_empty() {
        return Err(Error::invalid("no disk fractions given"));
    }
    if let Some(f) = disk_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::invalid(format!("disk fraction {f} outside (0, 1)")));
    }
    let index = SpatialIndex::new(pc);
    let centers = disk_centers(pc, num_disks, seed)?;
    let diag = 3.0_f64.sqrt();
    let total: f64 = disk_fractions
        .iter()
        .map(|f| nuc_at(&index, &centers, f * diag))
        .sum();
    Ok(total / disk_fractions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_have_zero_nuc() {
        let pc = PointCloud::new(vec![[0.1, 0.2, 0.3]; 50]).unwrap();
        let index = SpatialIndex::new(&pc);
        assert_eq!(nuc_at(&index, &[[0.1, 0.2, 0.3]; 4], 0.01), 0.0);
        assert_eq!(nuc(&pc, 0.01, 4, 0).unwrap(), 0.0);
    }

    #[test]
    fn regular_grid_interior_disks_are_uniform() {
        let n = 40;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push([i as f64 / (n - 1) as f64 - 0.5, j as f64 / (n - 1) as f64 - 0.5, 0.0]);
            }
        }
        let pc = PointCloud::new(pts.clone()).unwrap();
        let index = SpatialIndex::new(&pc);
        let interior: Vec<Vec3> = pts
            .iter()
            .copied()
            .filter(|p| p[0].abs() < 0.3 && p[1].abs() < 0.3)
            .collect();
        for f in MNUC_DISK_FRACTIONS {
            let r = f * 3.0_f64.sqrt() * 10.0;
            assert!(nuc_at(&index, &interior, r) <= 0.1);
        }
    }

    #[test]
    fn rejects_bad_fractions() {
        let pc = PointCloud::new(vec![[0.0; 3]; 3]).unwrap();
        assert!(mnuc(&pc, &[1.5], 2, 0).is_err());
        assert!(mnuc(&pc, &[], 2, 0).is_err());
        assert!(mnuc(&pc, &[0.1], 0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let pts: Vec<Vec3> = (0..300)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin() * 0.4, (t * 1.3).cos() * 0.4, (t * 0.7).sin() * 0.1]
            })
            .collect();
        let pc = PointCloud::new(pts).unwrap();
        let a = mnuc(&pc, &MNUC_DISK_FRACTIONS, 30, 9).unwrap();
        let b = mnuc(&pc, &MNUC_DISK_FRACTIONS, 30, 9).unwrap();
        assert_eq!(a, b);
    }
}
