//! The `.spcv` binary layout (little-endian throughout):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `SPCV` |
//! | 4     | u32 version (1) |
//! | 12    | u32 T, U, V |
//! | 24    | f64 center x, y, z |
//! | 8     | f64 scale |
//! | T·U·V·12 | f32 x, y, z per pixel, frames in order, pixels row-major |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::SpcvFrame;
use crate::geom::NormalizationTransform;
use crate::io::{FrameMeta, SpcvContainer};

pub const MAGIC: [u8; 4] = *b"SPCV";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 52;

pub fn encode_spcv(c: &SpcvContainer) -> Result<Vec<u8>> {
    if c.is_empty() {
        return Err(Error::invalid("cannot write an empty container"));
    }
    let (rows, cols) = c.dims();
    let dim = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::invalid(format!("{what} {n} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + c.len() * rows * cols * 12);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (n, what) in [(c.len(), "frame count"), (rows, "rows"), (cols, "cols")] {
        out.extend_from_slice(&dim(n, what)?.to_le_bytes());
    }
    for v in c.transform.center {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.transform.scale.to_le_bytes());
    for f in c.frames() {
        for p in f.pixels() {
            for &v in p {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Decode a container. Frame metadata is not part of the file; frames are
/// labelled by index with an unknown (NaN) fit loss.
pub fn decode_spcv(bytes: &[u8]) -> Result<SpcvContainer> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let (t, rows, cols) = (
        u32_at(bytes, 8) as u64,
        u32_at(bytes, 12) as u64,
        u32_at(bytes, 16) as u64,
    );
    if t == 0 || rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("header declares empty dimensions {t}x{rows}x{cols}")));
    }
    let expected = t
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .and_then(|n| n.checked_mul(12))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::invalid(format!("header dimensions {t}x{rows}x{cols} overflow")))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    let transform = NormalizationTransform {
        center: [f64_at(bytes, 20), f64_at(bytes, 28), f64_at(bytes, 36)],
        scale: f64_at(bytes, 44),
    };
    if !(transform.scale.is_finite() && transform.scale > 0.0) || transform.center.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("header holds an invalid normalization transform"));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut container = SpcvContainer::new(rows, cols, transform)?;
    let frame_bytes = rows * cols * 12;
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(frame_bytes).enumerate() {
        let pixels = chunk
            .chunks_exact(12)
            .map(|p| {
                let c = |k: usize| f32::from_le_bytes(p[4 * k..4 * k + 4].try_into().unwrap()) as f64;
                [c(0), c(1), c(2)]
            })
            .collect();
        let frame = SpcvFrame::new(rows, cols, pixels).map_err(|e| e.in_frame(i))?;
        container.push(
            frame,
            FrameMeta {
                source: format!("frame{i}"),
                fit_loss: f64::NAN,
            },
        )?;
    }
    Ok(container)
}

pub fn write_spcv(c: &SpcvContainer, path: &Path) -> Result<()> {
    fs::write(path, encode_spcv(c)?)?;
    Ok(())
}

pub fn read_spcv(path: &Path) -> Result<SpcvContainer> {
    decode_spcv(&fs::read(path)?)
}
