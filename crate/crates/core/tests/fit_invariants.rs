use spcv_core::fixtures::{plane, sphere};
use spcv_core::frame::{structurize_frame, FrameFitConfig};
use spcv_core::PointCloud;

/// Means of consecutive 100-step blocks after the first 10% of steps.
fn block_means(curve: &[f64], steps: usize) -> Vec<f64> {
    let start = steps.div_ceil(10);
    curve[start.min(curve.len())..]
        .chunks_exact(100)
        .map(|c| c.iter().sum::<f64>() / 100.0)
        .collect()
}

fn assert_nonincreasing(target: &PointCloud, side: usize, steps: usize) {
    let cfg = FrameFitConfig {
        steps,
        ..Default::default()
    };
    let fit = structurize_frame(target, side, side, &cfg, 0).unwrap();
    let means = block_means(&fit.report.loss_curve, steps);
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "block means rose: {means:?}");
    }
}

#[test]
fn sphere_loss_is_nonincreasing_after_warmup() {
    assert_nonincreasing(&sphere(256, 0).unwrap(), 16, 1000);
}

#[test]
fn resampled_plane_loss_is_nonincreasing_after_warmup() {
    // a finer plane than the grid, so the start is not already optimal
    let target: PointCloud = plane(23, 23).unwrap();
    assert_nonincreasing(&target, 16, 1000);
}

#[test]
fn exact_plane_stops_at_once() {
    let fit = structurize_frame(&plane(16, 16).unwrap(), 16, 16, &FrameFitConfig::default(), 0).unwrap();
    assert_eq!(fit.report.loss_curve.len(), 1);
}
