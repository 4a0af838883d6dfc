//! Quantized frames for external 2D video codecs.
//!
//! Every axis is mapped linearly onto `0..=2^bits - 1` over one range shared
//! by the whole sequence. Export writes one 3-channel PPM per frame (samples
//! big-endian 16-bit, `maxval = 2^bits - 1`) plus a `key=value` sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::SpcvFrame;
use crate::geom::NormalizationTransform;
use crate::io::SpcvContainer;

pub const SIDECAR_NAME: &str = "frames.meta";

/// Closed value interval of one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    fn span(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedFrameSet {
    pub bits: u32,
    pub rows: usize,
    pub cols: usize,
    pub ranges: [AxisRange; 3],
    pub transform: NormalizationTransform,
    /// Per frame, three `rows x cols` planes (x, y, z) in row-major order.
    pub frames: Vec<[Vec<u16>; 3]>,
}

impl QuantizedFrameSet {
    pub fn levels(&self) -> u32 {
        (1 << self.bits) - 1
    }

    /// Worst-case dequantization error of each axis.
    pub fn error_bound(&self) -> [f64; 3] {
        self.ranges.map(|r| r.span() / self.levels() as f64 / 2.0)
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 10 || bits == 16 {
        Ok(())
    } else {
        Err(Error::invalid(format!("unsupported bit depth {bits} (expected 10 or 16)")))
    }
}

/// Per-axis min/max over every pixel of every frame.
pub fn data_ranges(c: &SpcvContainer) -> Result<[AxisRange; 3]> {
    if c.is_empty() {
        return Err(Error::invalid("container has no frames"));
    }
    let mut r = [AxisRange {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    }; 3];
    for f in c.frames() {
        for p in f.pixels() {
            for k in 0..3 {
                r[k].min = r[k].min.min(p[k]);
                r[k].max = r[k].max.max(p[k]);
            }
        }
    }
    Ok(r)
}

/// Quantize over the data's own per-axis range.
pub fn quantize_frames(c: &SpcvContainer, bits: u32) -> Result<QuantizedFrameSet> {
    let ranges = data_ranges(c)?;
    quantize_frames_in(c, bits, ranges)
}

/// Quantize over declared ranges; values outside them are rejected.
pub fn quantize_frames_in(c: &SpcvContainer, bits: u32, ranges: [AxisRange; 3]) -> Result<QuantizedFrameSet> {
    check_bits(bits)?;
    if c.is_empty() {
        return Err(Error::invalid("container has no frames"));
    }
    if ranges.iter().any(|r| !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max)) {
        return Err(Error::invalid("quantization ranges must be finite with min <= max"));
    }
    let levels = ((1u32 << bits) - 1) as f64;
    let (rows, cols) = c.dims();
    let mut frames = Vec::with_capacity(c.len());
    for (t, f) in c.frames().iter().enumerate() {
        let mut planes: [Vec<u16>; 3] = Default::default();
        for (k, plane) in planes.iter_mut().enumerate() {
            let r = ranges[k];
            *plane = f
                .pixels()
                .iter()
                .map(|p| {
                    let v = p[k];
                    if v < r.min || v > r.max {
                        return Err(Error::invalid(format!(
                            "frame {t}: value {v} outside axis {k} range [{}, {}]",
                            r.min, r.max
                        )));
                    }
                    if r.span() == 0.0 {
                        return Ok(0);
                    }
                    Ok(((v - r.min) / r.span() * levels).round() as u16)
                })
                .collect::<Result<_>>()?;
        }
        frames.push(planes);
    }
    Ok(QuantizedFrameSet {
        bits,
        rows,
        cols,
        ranges,
        transform: c.transform,
        frames,
    })
}

pub fn dequantize_frames(q: &QuantizedFrameSet) -> Result<SpcvContainer> {
    check_bits(q.bits)?;
    let levels = q.levels() as f64;
    let n = q.rows * q.cols;
    let frames = q
        .frames
        .iter()
        .map(|planes| {
            if planes.iter().any(|p| p.len() != n) {
                return Err(Error::invalid("quantized plane size does not match dimensions"));
            }
            let px = (0..n)
                .map(|i| {
                    let mut p = [0.0; 3];
                    for k in 0..3 {
                        let r = q.ranges[k];
                        p[k] = r.min + planes[k][i] as f64 / levels * r.span();
                    }
                    p
                })
                .collect();
            SpcvFrame::new(q.rows, q.cols, px)
        })
        .collect::<Result<Vec<_>>>()?;
    SpcvContainer::from_frames(frames, q.transform)
}

fn frame_file(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("{t:06}.ppm"))
}

/// Write `000000.ppm`, `000001.ppm`, ... and the sidecar into `dir`
/// (created if needed). Returns the frame file paths.
pub fn export_codec_frames(q: &QuantizedFrameSet, dir: &Path) -> Result<Vec<PathBuf>> {
    check_bits(q.bits)?;
    fs::create_dir_all(dir)?;
    let n = q.rows * q.cols;
    let mut paths = Vec::with_capacity(q.frames.len());
    for (t, planes) in q.frames.iter().enumerate() {
        let mut out = format!("P6\n{} {}\n{}\n", q.cols, q.rows, q.levels()).into_bytes();
        out.reserve(n * 6);
        for i in 0..n {
            for plane in planes {
                out.extend_from_slice(&plane[i].to_be_bytes());
            }
        }
        let path = frame_file(dir, t);
        fs::write(&path, out)?;
        paths.push(path);
    }
    fs::write(dir.join(SIDECAR_NAME), sidecar_text(q))?;
    Ok(paths)
}

fn sidecar_text(q: &QuantizedFrameSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format=spcv-frames");
    let _ = writeln!(s, "version=1");
    let _ = writeln!(s, "bits={}", q.bits);
    let _ = writeln!(s, "frames={}", q.frames.len());
    let _ = writeln!(s, "rows={}", q.rows);
    let _ = writeln!(s, "cols={}", q.cols);
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        let _ = writeln!(s, "range_{axis}_min={:e}", q.ranges[k].min);
        let _ = writeln!(s, "range_{axis}_max={:e}", q.ranges[k].max);
        let _ = writeln!(s, "center_{axis}={:e}", q.transform.center[k]);
    }
    let _ = writeln!(s, "scale={:e}", q.transform.scale);
    for t in 0..q.frames.len() {
        let _ = writeln!(s, "frame={t:06}.ppm");
    }
    s
}

struct Sidecar {
    entries: Vec<(String, String)>,
    path: PathBuf,
}

impl Sidecar {
    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse {
                location: self.path.display().to_string(),
                message: format!("missing key {key}"),
            })
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| Error::Parse {
            location: self.path.display().to_string(),
            message: format!("bad value {v:?} for {key}"),
        })
    }
}

/// Read frames written by [`export_codec_frames`] back into a quantized set.
pub fn import_codec_frames(dir: &Path) -> Result<QuantizedFrameSet> {
    let path = dir.join(SIDECAR_NAME);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingMetadata(path)),
        Err(e) => return Err(e.into()),
    };
    let entries = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse {
                    location: format!("{}:{}", path.display(), i + 1),
                    message: "expected key=value".into(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let side = Sidecar { entries, path };
    if side.get("format")? != "spcv-frames" {
        return Err(Error::Parse {
            location: side.path.display().to_string(),
            message: "not an spcv frame sidecar".into(),
        });
    }
    let bits: u32 = side.num("bits")?;
    check_bits(bits)?;
    let (rows, cols, count): (usize, usize, usize) = (side.num("rows")?, side.num("cols")?, side.num("frames")?);
    let mut ranges = [AxisRange { min: 0.0, max: 0.0 }; 3];
    let mut center = [0.0; 3];
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        ranges[k] = AxisRange {
            min: side.num(&format!("range_{axis}_min"))?,
            max: side.num(&format!("range_{axis}_max"))?,
        };
        center[k] = side.num(&format!("center_{axis}"))?;
    }
    let transform = NormalizationTransform {
        center,
        scale: side.num("scale")?,
    };
    let names: Vec<&str> = side
        .entries
        .iter()
        .filter(|(k, _)| k == "frame")
        .map(|(_, v)| v.as_str())
        .collect();
    if names.len() != count {
        return Err(Error::Parse {
            location: side.path.display().to_string(),
            message: format!("frames={count} but {} frame entries", names.len()),
        });
    }
    let levels = (1u32 << bits) - 1;
    let frames = names
        .iter()
        .map(|name| read_ppm(&dir.join(name), rows, cols, levels))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedFrameSet {
        bits,
        rows,
        cols,
        ranges,
        transform,
        frames,
    })
}

fn read_ppm(path: &Path, rows: usize, cols: usize, levels: u32) -> Result<[Vec<u16>; 3]> {
    let bytes = fs::read(path)?;
    let at = || path.display().to_string();
    // header: magic, width, height, maxval separated by whitespace, then one byte
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse {
                location: at(),
                message: "truncated PPM header".into(),
            });
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let dims_ok = fields[0] == "P6"
        && fields[1].parse::<usize>().ok() == Some(cols)
        && fields[2].parse::<usize>().ok() == Some(rows)
        && fields[3].parse::<u32>().ok() == Some(levels);
    if !dims_ok {
        return Err(Error::Parse {
            location: at(),
            message: format!("PPM header {fields:?} does not match {cols}x{rows} maxval {levels}"),
        });
    }
    let n = rows * cols;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n * 6 {
        return Err(Error::Truncated {
            expected: (pos + n * 6) as u64,
            found: bytes.len() as u64,
        });
    }
    let mut planes: [Vec<u16>; 3] = Default::default();
    for plane in planes.iter_mut() {
        plane.reserve(n);
    }
    for px in body.chunks_exact(6) {
        for (k, plane) in planes.iter_mut().enumerate() {
            let v = u16::from_be_bytes([px[2 * k], px[2 * k + 1]]);
            if v as u32 > levels {
                return Err(Error::Parse {
                    location: at(),
                    message: format!("sample {v} exceeds maxval {levels}"),
                });
            }
            plane.push(v);
        }
    }
    Ok(planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn container(frames: Vec<Vec<[f64; 3]>>, rows: usize, cols: usize) -> SpcvContainer {
        let frames = frames
            .into_iter()
            .map(|p| SpcvFrame::new(rows, cols, p).unwrap())
            .collect();
        SpcvContainer::from_frames(frames, NormalizationTransform::identity()).unwrap()
    }

    #[test]
    fn constant_frames_are_exact() {
        let c = container(vec![vec![[0.3, -0.1, 0.2]; 4]; 2], 2, 2);
        let q = quantize_frames(&c, 16).unwrap();
        assert_eq!(dequantize_frames(&q).unwrap().frames(), c.frames());
    }

    #[test]
    fn range_endpoints_are_exact() {
        let c = container(vec![vec![[-0.5, 0.0, 1.0], [0.5, 2.0, 3.0]]], 1, 2);
        let q = quantize_frames(&c, 10).unwrap();
        assert_eq!(q.frames[0][0], vec![0, 1023]);
        assert_eq!(dequantize_frames(&q).unwrap().frames(), c.frames());
    }

    #[test]
    fn bad_depth_and_out_of_range() {
        let c = container(vec![vec![[0.0; 3], [1.0; 3]]], 1, 2);
        assert!(quantize_frames(&c, 12).is_err());
        let r = [AxisRange { min: 0.0, max: 0.5 }; 3];
        assert!(quantize_frames_in(&c, 16, r).is_err());
    }

    #[test]
    fn export_names_and_missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let c = container(vec![vec![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]; 2], 1, 2);
        let q = quantize_frames(&c, 16).unwrap();
        let paths = export_codec_frames(&q, dir.path()).unwrap();
        let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, vec!["000000.ppm", "000001.ppm"]);
        assert_eq!(import_codec_frames(dir.path()).unwrap(), q);
        fs::remove_file(dir.path().join(SIDECAR_NAME)).unwrap();
        assert!(matches!(import_codec_frames(dir.path()), Err(Error::MissingMetadata(_))));
    }
}
