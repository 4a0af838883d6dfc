//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any failed.
//!
//! Run a subset with `cargo test --test acceptance -- 2 5`.

mod fitting;
mod formats;
mod gradients;
mod metrics;
mod regularizers;

use std::time::Instant;

pub type Outcome = Result<String, String>;

/// Fail with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "gradient correctness", gradients::run),
        (2, "metric oracles", metrics::run),
        (3, "frame-wise fit on the sphere", fitting::frame_fit),
        (4, "sequence-wise correctness", fitting::sequence),
        (5, "regularizer analytic zeros", regularizers::run),
        (6, "format and quantization", formats::run),
        (7, "interpolation baseline", fitting::interpolation),
        (8, "determinism", fitting::determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}) [{secs:.1}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}) [{secs:.1}s]: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
