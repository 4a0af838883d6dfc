//! Point cloud readers (PLY ascii / binary little-endian, OFF, XYZ) and a
//! binary PLY writer. Only vertex positions are kept.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFormat {
    PlyAscii,
    PlyBinaryLe,
    Off,
    Xyz,
}

impl PointFormat {
    pub fn name(self) -> &'static str {
        match self {
            PointFormat::PlyAscii => "ply-ascii",
            PointFormat::PlyBinaryLe => "ply-binary-le",
            PointFormat::Off => "off",
            PointFormat::Xyz => "xyz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ply-ascii" => PointFormat::PlyAscii,
            "ply-binary-le" => PointFormat::PlyBinaryLe,
            "off" => PointFormat::Off,
            "xyz" => PointFormat::Xyz,
            other => return Err(Error::invalid(format!("unknown point format {other:?}"))),
        })
    }

    /// Guess from the extension, and for `.ply` from the header's format line.
    pub fn detect(path: &Path, bytes: &[u8]) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "ply" => {
                let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]);
                if head.contains("format binary_little_endian") {
                    Ok(PointFormat::PlyBinaryLe)
                } else {
                    Ok(PointFormat::PlyAscii)
                }
            }
            "off" => Ok(PointFormat::Off),
            "xyz" | "txt" | "pts" => Ok(PointFormat::Xyz),
            _ => Err(Error::invalid(format!("cannot infer point format of {}", path.display()))),
        }
    }
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

/// Read `path` in `format`, or guess the format when `None`.
pub fn read_point_cloud(path: &Path, format: Option<PointFormat>) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    let format = match format {
        Some(f) => f,
        None => PointFormat::detect(path, &bytes)?,
    };
    parse_point_cloud(&bytes, format)
}

pub fn parse_point_cloud(bytes: &[u8], format: PointFormat) -> Result<PointCloud> {
    let points = match format {
        PointFormat::PlyAscii | PointFormat::PlyBinaryLe => parse_ply(bytes, format)?,
        PointFormat::Off => parse_off(text(bytes)?)?,
        PointFormat::Xyz => parse_xyz(text(bytes)?)?,
    };
    if points.is_empty() {
        return Err(parse_err("end of file", "no points"));
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(parse_err("vertex data", "non-finite coordinate"));
    }
    PointCloud::new(points)
}

fn text(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| parse_err(format!("byte {}", e.valid_up_to()), "invalid UTF-8"))
}

fn parse_coord(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(format!("line {line}"), "expected 3 coordinates"))?;
    tok.parse::<f64>()
        .map_err(|_| parse_err(format!("line {line}"), format!("bad number {tok:?}")))
}

fn parse_xyz(src: &str) -> Result<Vec<Vec3>> {
    let mut pts = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let p = [
            parse_coord(it.next(), n + 1)?,
            parse_coord(it.next(), n + 1)?,
            parse_coord(it.next(), n + 1)?,
        ];
        pts.push(p);
    }
    Ok(pts)
}

fn parse_off(src: &str) -> Result<Vec<Vec3>> {
    // (line number, content) without comments and blank lines
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err("line 1", "empty file"))?;
    let counts_line = match first {
        "OFF" => lines.next().ok_or_else(|| parse_err(format!("line {n}"), "missing counts"))?,
        l if l.starts_with("OFF") => (n, l[3..].trim()),
        _ => return Err(parse_err(format!("line {n}"), "missing OFF keyword")),
    };
    let mut counts = counts_line.1.split_whitespace();
    let vertices: usize = counts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(format!("line {}", counts_line.0), "bad vertex count"))?;
    let mut pts = Vec::with_capacity(vertices);
    for _ in 0..vertices {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err("end of file", format!("expected {vertices} vertices, found {}", pts.len())))?;
        let mut it = l.split_whitespace();
        pts.push([
            parse_coord(it.next(), n)?,
            parse_coord(it.next(), n)?,
            parse_coord(it.next(), n)?,
        ]);
    }
    Ok(pts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    binary: bool,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = || -> Result<(usize, String)> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(format!("byte {pos}"), "header not terminated by end_header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| parse_err(format!("byte {pos}"), "header is not UTF-8"))?
            .trim_end_matches('\r')
            .trim()
            .to_string();
        pos += end + 1;
        line_no += 1;
        Ok((line_no, line))
    };
    let (_, magic) = next_line()?;
    if magic != "ply" {
        return Err(parse_err("line 1", "missing ply magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (n, line) = next_line()?;
        let at = format!("line {n}");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                binary = Some(match tok.next() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    Some(other) => return Err(parse_err(at, format!("unsupported format {other}"))),
                    None => return Err(parse_err(at, "missing format")),
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(&at, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(&at, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(&at, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| parse_err(&at, "property without type"))?;
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => Property::List { count, item },
                        _ => return Err(parse_err(&at, "bad list property types")),
                    }
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| parse_err(&at, format!("unknown type {ty}")))?;
                    let name = tok.next().ok_or_else(|| parse_err(&at, "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(at, format!("unexpected header keyword {other}"))),
        }
    }
    let binary = binary.ok_or_else(|| parse_err("header", "missing format line"))?;
    Ok(Header {
        binary,
        elements,
        body_offset: pos,
        body_line: line_no + 1,
    })
}

/// Indices of `x`, `y`, `z` among the vertex element's properties.
fn xyz_slots(el: &Element) -> Result<[usize; 3]> {
    let find = |axis: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
            .ok_or_else(|| parse_err("header", format!("vertex element lacks property {axis}")))
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

fn parse_ply(bytes: &[u8], format: PointFormat) -> Result<Vec<Vec3>> {
    let header = parse_ply_header(bytes)?;
    let expect_binary = format == PointFormat::PlyBinaryLe;
    if header.binary != expect_binary {
        return Err(parse_err("header", format!("file is not {}", format.name())));
    }
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err("header", "no vertex element"))?;
    let slots = xyz_slots(&header.elements[vi])?;
    if header.binary {
        parse_ply_binary(&bytes[header.body_offset..], header.body_offset, &header.elements[..=vi], slots)
    } else {
        parse_ply_ascii(bytes, &header, vi, slots)
    }
}

fn parse_ply_ascii(bytes: &[u8], header: &Header, vi: usize, slots: [usize; 3]) -> Result<Vec<Vec3>> {
    let body = text(&bytes[header.body_offset..])?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (header.body_line + i, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    // skip the records of elements stored before the vertices
    for el in &header.elements[..vi] {
        for _ in 0..el.count {
            lines
                .next()
                .ok_or_else(|| parse_err("end of file", format!("truncated {} element", el.name)))?;
        }
    }
    let el = &header.elements[vi];
    let mut pts = Vec::with_capacity(el.count);
    for _ in 0..el.count {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err("end of file", format!("expected {} vertices, found {}", el.count, pts.len())))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut p = [0.0; 3];
        for (k, &s) in slots.iter().enumerate() {
            p[k] = parse_coord(toks.get(s).copied(), n)?;
        }
        pts.push(p);
    }
    Ok(pts)
}

fn parse_ply_binary(body: &[u8], offset: usize, elements: &[Element], slots: [usize; 3]) -> Result<Vec<Vec3>> {
    let mut pos = 0;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = body
            .get(*pos..*pos + n)
            .ok_or_else(|| parse_err(format!("byte {}", offset + *pos), "unexpected end of binary data"))?;
        *pos += n;
        Ok(s)
    };
    let last = elements.len() - 1;
    let mut pts = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        for _ in 0..el.count {
            let mut p = [0.0; 3];
            for (i, prop) in el.props.iter().enumerate() {
                match *prop {
                    Property::Scalar { ty, .. } => {
                        let v = ty.read_le(take(&mut pos, ty.size())?);
                        if e == last {
                            if let Some(k) = slots.iter().position(|&s| s == i) {
                                p[k] = v;
                            }
                        }
                    }
                    Property::List { count, item } => {
                        let n = count.read_le(take(&mut pos, count.size())?);
                        if !(n >= 0.0) {
                            return Err(parse_err(format!("byte {}", offset + pos), "negative list length"));
                        }
                        take(&mut pos, n as usize * item.size())?;
                    }
                }
            }
            if e == last {
                pts.push(p);
            }
        }
    }
    Ok(pts)
}

/// Binary little-endian PLY with `double` coordinates, so reading it back is
/// bit-exact.
pub fn write_ply_binary(path: &Path, pc: &PointCloud) -> Result<()> {
    fs::write(path, ply_binary_bytes(pc))?;
    Ok(())
}

pub fn ply_binary_bytes(pc: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + 24 * pc.len());
    let _ = write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        pc.len()
    );
    for p in pc.points() {
        for c in p {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

/// Plain `x y z` lines with round-trip precision.
pub fn write_xyz(path: &Path, pc: &PointCloud) -> Result<()> {
    let mut s = String::with_capacity(pc.len() * 60);
    for p in pc.points() {
        s.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    fs::write(path, s)?;
    Ok(())
}
