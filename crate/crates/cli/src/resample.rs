//! Bring every frame to exactly `U * V` points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcv_core::{farthest_point_sample, PointCloud, Result};

/// A resampled frame and how many of its points are repeats.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub cloud: PointCloud,
    pub duplicated: usize,
}

/// Farthest point sampling from a seed-chosen start. Clouds with fewer than
/// `n` points keep every point (in sampling order) and are topped up with
/// points drawn uniformly with replacement.
pub fn resample(pc: &PointCloud, n: usize, seed: u64) -> Result<Resampled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..pc.len());
    let take = n.min(pc.len());
    let mut ids = farthest_point_sample(pc, take, start)?;
    let duplicated = n - take;
    for _ in 0..duplicated {
        ids.push(rng.gen_range(0..pc.len()));
    }
    Ok(Resampled {
        cloud: pc.select(&ids)?,
        duplicated,
    })
}
