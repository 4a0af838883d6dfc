//! Representation quality: spatial smoothness, temporal consistency and
//! geometric fidelity, plus their `key=value` text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frame::{reproject, SpcvFrame};
use crate::geom::{NormalizationTransform, PointCloud};
use crate::index::SpatialIndex;
use crate::metrics::{chamfer, hausdorff, mnuc, MNUC_DISK_FRACTIONS};

/// Default window sizes: odd sizes from 3 up to 11 (the largest odd size <= 12).
pub const DEFAULT_WINDOWS: [usize; 5] = [3, 5, 7, 9, 11];

/// Mean, over every complete `k x k` window, of the fraction of the window's
/// non-center pixels that are among the `k^2 - 1` nearest neighbors (in 3D)
/// of the center pixel.
pub fn spatial_smoothness_ratio(frame: &SpcvFrame, k: usize) -> Result<f64> {
    let index = SpatialIndex::from_points(frame.pixels());
    smoothness_with_index(frame, &index, k)
}

fn smoothness_with_index(frame: &SpcvFrame, index: &SpatialIndex, k: usize) -> Result<f64> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::invalid(format!("window size must be odd and >= 3, got {k}")));
    }
    let (h, w) = frame.dims();
    if h < k || w < k {
        return Err(Error::invalid(format!("window {k} larger than frame {h}x{w}")));
    }
    let b = k / 2;
    let m = k * k - 1;
    let mut total = 0.0;
    let mut windows = 0usize;
    let mut in_window = vec![false; h * w];
    for i in b..h - b {
        for j in b..w - b {
            let center = i * w + j;
            // The center itself occupies one of the k^2 slots unless it ties
            // with a duplicate of lower id, so drop it and keep m others.
            let nn: Vec<usize> = index
                .knn_ids(frame.pixels()[center], m + 1)
                .into_iter()
                .filter(|&id| id != center)
                .take(m)
                .collect();
            for di in i - b..=i + b {
                for dj in j - b..=j + b {
                    in_window[di * w + dj] = true;
                }
            }
            in_window[center] = false;
            let hits = nn.iter().filter(|&&id| in_window[id]).count();
            for di in i - b..=i + b {
                for dj in j - b..=j + b {
                    in_window[di * w + dj] = false;
                }
            }
            total += hits as f64 / m as f64;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    /// `(k, ratio)` in the order evaluated.
    pub ratios: Vec<(usize, f64)>,
}

impl SmoothnessReport {
    pub fn ratio(&self, k: usize) -> Option<f64> {
        self.ratios.iter().find(|(kk, _)| *kk == k).map(|&(_, r)| r)
    }
}

/// Smoothness ratios of one frame for each window size that fits.
pub fn smoothness_report(frame: &SpcvFrame, windows: &[usize]) -> Result<SmoothnessReport> {
    let index = SpatialIndex::from_points(frame.pixels());
    let (h, w) = frame.dims();
    let mut ratios = Vec::new();
    for &k in windows {
        if k > h || k > w {
            continue;
        }
        ratios.push((k, smoothness_with_index(frame, &index, k)?));
    }
    Ok(SmoothnessReport { ratios })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `(K, ratio averaged over adjacent frame pairs)`.
    pub ratios: Vec<(usize, f64)>,
    /// `per_pair[p][q]` is the ratio of pair `(p, p+1)` at the `q`-th K.
    pub per_pair: Vec<Vec<f64>>,
}

impl ConsistencyReport {
    pub fn ratio(&self, k: usize) -> Option<f64> {
        self.ratios.iter().find(|(kk, _)| *kk == k).map(|&(_, r)| r)
    }
}

/// Fraction of pixels that track ground truth between adjacent frames.
///
/// For pixel `q` and pair `(t, t+1)`: `i` is the ground-truth point of frame
/// `t` nearest to `G_t(q)` and `j` the one of frame `t+1` nearest to
/// `G_{t+1}(q)`. The pixel is consistent at `K` when `j` is among the `K`
/// nearest ground-truth neighbors of `gt_{t+1}[i]`, `i` itself included.
pub fn temporal_consistency_ratio(
    frames: &[SpcvFrame],
    ground_truth: &[PointCloud],
    ks: &[usize],
) -> Result<ConsistencyReport> {
    if frames.len() != ground_truth.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} ground-truth clouds",
            frames.len(),
            ground_truth.len()
        )));
    }
    if frames.len() < 2 {
        return Err(Error::invalid("consistency needs at least two frames"));
    }
    let n = ground_truth[0].len();
    if ground_truth.iter().any(|g| g.len() != n) {
        return Err(Error::invalid("ground-truth frames differ in length: no correspondence"));
    }
    let dims = frames[0].dims();
    if frames.iter().any(|f| f.dims() != dims) {
        return Err(Error::invalid("frames differ in dimensions"));
    }
    if ks.iter().any(|&k| k == 0) {
        return Err(Error::invalid("K must be >= 1"));
    }
    let k_max = ks.iter().copied().max().unwrap_or(0);

    let mut per_pair = Vec::with_capacity(frames.len() - 1);
    for t in 0..frames.len() - 1 {
        let gt_index = SpatialIndex::new(&ground_truth[t]);
        let next_index = SpatialIndex::new(&ground_truth[t + 1]);
        let pixels = frames[t].pixels().len();
        let mut hits = vec![0usize; ks.len()];
        for q in 0..pixels {
            let (i, _) = gt_index.nearest(frames[t].pixels()[q]);
            let (j, _) = next_index.nearest(frames[t + 1].pixels()[q]);
            let rank = next_index
                .knn_ids(ground_truth[t + 1].get(i), k_max)
                .iter()
                .position(|&id| id == j);
            if let Some(r) = rank {
                for (slot, &k) in ks.iter().enumerate() {
                    if r < k {
                        hits[slot] += 1;
                    }
                }
            }
        }
        per_pair.push(hits.iter().map(|&h| h as f64 / pixels as f64).collect::<Vec<_>>());
    }
    let ratios = ks
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let mean = per_pair.iter().map(|p| p[slot]).sum::<f64>() / per_pair.len() as f64;
            (k, mean)
        })
        .collect();
    Ok(ConsistencyReport { ratios, per_pair })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameFidelity {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub mnuc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityReport {
    pub frames: Vec<FrameFidelity>,
    pub mean: FrameFidelity,
}

/// Settings of the uniformity part of the fidelity report.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityConfig {
    pub disk_fractions: Vec<f64>,
    pub num_disks: usize,
    pub seed: u64,
}

impl Default for UniformityConfig {
    fn default() -> Self {
        Self {
            disk_fractions: MNUC_DISK_FRACTIONS.to_vec(),
            num_disks: 1000,
            seed: 0,
        }
    }
}

/// CD, HD and mNUC of each reprojected frame against its original. With
/// `denormalize`, frames are mapped back through `transform` first and the
/// originals are taken to be in source units.
pub fn fidelity_report(
    frames: &[SpcvFrame],
    originals: &[PointCloud],
    transform: &NormalizationTransform,
    denormalize: bool,
    uniformity: &UniformityConfig,
) -> Result<FidelityReport> {
    if frames.len() != originals.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} original clouds",
            frames.len(),
            originals.len()
        )));
    }
    if frames.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let mut out = Vec::with_capacity(frames.len());
    for (frame, original) in frames.iter().zip(originals) {
        let mut pc = reproject(frame);
        if denormalize {
            pc = transform.invert(&pc);
        }
        out.push(FrameFidelity {
            chamfer: chamfer(&pc, original),
            hausdorff: hausdorff(&pc, original),
            mnuc: mnuc(&pc, &uniformity.disk_fractions, uniformity.num_disks, uniformity.seed)?,
        });
    }
    let n = out.len() as f64;
    let mean = FrameFidelity {
        chamfer: out.iter().map(|f| f.chamfer).sum::<f64>() / n,
        hausdorff: out.iter().map(|f| f.hausdorff).sum::<f64>() / n,
        mnuc: out.iter().map(|f| f.mnuc).sum::<f64>() / n,
    };
    Ok(FidelityReport { frames: out, mean })
}

/// Shortest decimal that round-trips the value.
fn num(x: f64) -> String {
    format!("{x:e}")
}

impl SmoothnessReport {
    pub fn to_records(&self, frame: usize) -> String {
        let mut s = String::new();
        for &(k, r) in &self.ratios {
            let _ = writeln!(s, "record=smoothness frame={frame} k={k} ratio={}", num(r));
        }
        s
    }
}

impl ConsistencyReport {
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        for (slot, &(k, r)) in self.ratios.iter().enumerate() {
            for (pair, p) in self.per_pair.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "record=consistency pair={pair} K={k} ratio={}",
                    num(p[slot])
                );
            }
            let _ = writeln!(s, "record=consistency pair=mean K={k} ratio={}", num(r));
        }
        s
    }
}

impl FidelityReport {
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        let line = |s: &mut String, label: &str, f: &FrameFidelity| {
            let _ = writeln!(
                s,
                "record=fidelity frame={label} cd={} hd={} mnuc={}",
                num(f.chamfer),
                num(f.hausdorff),
                num(f.mnuc)
            );
        };
        for (t, f) in self.frames.iter().enumerate() {
            line(&mut s, &t.to_string(), f);
        }
        line(&mut s, "mean", &self.mean);
        s
    }
}
