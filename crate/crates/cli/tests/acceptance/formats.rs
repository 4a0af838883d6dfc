//! Container round trips, quantization error bound, codec export round trip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcv_core::frame::SpcvFrame;
use spcv_core::io::{
    decode_spcv, dequantize_frames, encode_spcv, export_codec_frames, import_codec_frames, quantize_frames,
    SpcvContainer,
};
use spcv_core::NormalizationTransform;

use crate::{ensure, Outcome};

/// Exact worst case of 16-bit quantization over a unit range: half a step.
const BOUND_16: f64 = 0.5 / 65535.0;

fn random_container(rng: &mut ChaCha8Rng) -> SpcvContainer {
    let (t, rows, cols) = (rng.gen_range(1..5), rng.gen_range(1..20), rng.gen_range(1..20));
    let frames = (0..t)
        .map(|_| {
            let px = (0..rows * cols)
                .map(|_| {
                    // values representable in f32 so the round trip can be exact
                    let mut c = || rng.gen_range(-1.0e3_f32..1.0e3) as f64;
                    [c(), c(), c()]
                })
                .collect();
            SpcvFrame::new(rows, cols, px).unwrap()
        })
        .collect();
    let transform = NormalizationTransform {
        center: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
        scale: rng.gen_range(0.01..10.0),
    };
    SpcvContainer::from_frames(frames, transform).unwrap()
}

/// Four 500x500 frames of unit-box data: 10^6 pixels, 3 * 10^6 samples.
fn unit_box_container(rng: &mut ChaCha8Rng) -> SpcvContainer {
    let (rows, cols) = (500, 500);
    let frames = (0..4)
        .map(|_| {
            let px = (0..rows * cols)
                .map(|_| [rng.gen_range(-0.5..=0.5), rng.gen_range(-0.5..=0.5), rng.gen_range(-0.5..=0.5)])
                .collect();
            SpcvFrame::new(rows, cols, px).unwrap()
        })
        .collect();
    let mut c = SpcvContainer::from_frames(frames, NormalizationTransform::identity()).unwrap();
    // pin the range to the full unit box
    c.frames_mut()[0].pixels_mut()[0] = [-0.5; 3];
    c.frames_mut()[0].pixels_mut()[1] = [0.5; 3];
    c
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    for trial in 0..200 {
        let c = random_container(&mut rng);
        let bytes = encode_spcv(&c).map_err(|e| e.to_string())?;
        let back = decode_spcv(&bytes).map_err(|e| e.to_string())?;
        ensure(back.frames() == c.frames() && back.transform == c.transform, || {
            format!("container {trial} changed in a write/read round trip")
        })?;
        ensure(encode_spcv(&back).map_err(|e| e.to_string())? == bytes, || {
            format!("container {trial} re-encodes differently")
        })?;
    }

    let c = unit_box_container(&mut rng);
    let q = quantize_frames(&c, 16).map_err(|e| e.to_string())?;
    let deq = dequantize_frames(&q).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    let mut samples = 0usize;
    for (f, g) in c.frames().iter().zip(deq.frames()) {
        for (p, r) in f.pixels().iter().zip(g.pixels()) {
            for k in 0..3 {
                worst = worst.max((p[k] - r[k]).abs());
                samples += 1;
            }
        }
    }
    ensure(worst <= BOUND_16, || format!("16-bit error {worst:e} exceeds {BOUND_16:e}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    export_codec_frames(&q, dir.path()).map_err(|e| e.to_string())?;
    let imported = import_codec_frames(dir.path()).map_err(|e| e.to_string())?;
    ensure(imported == q, || "re-imported samples differ from the exported ones".into())?;
    let reimported = dequantize_frames(&imported).map_err(|e| e.to_string())?;
    ensure(reimported.frames() == deq.frames(), || {
        "re-imported geometry differs from the dequantized geometry".into()
    })?;

    Ok(format!(
        "200 containers bit-exact; 16-bit max error {worst:.3e} <= {BOUND_16:.3e} over {samples} samples; export/import lossless"
    ))
}
