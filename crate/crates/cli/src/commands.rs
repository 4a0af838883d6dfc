//! One function per CLI verb. Reports are `key=value` records, one per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use spcv_core::fixtures::{bending_cylinder, plane, sphere, translating_sphere, CylinderParams};
use spcv_core::frame::reproject;
use spcv_core::io::{
    dequantize_frames, export_codec_frames, import_codec_frames, quantize_frames, read_point_cloud, read_spcv,
    write_ply_binary, write_spcv, write_xyz, FrameMeta, SpcvContainer,
};
use spcv_core::metrics::chamfer;
use spcv_core::quality::{fidelity_report, smoothness_report, temporal_consistency_ratio, SmoothnessReport};
use spcv_core::sequence::{interpolate_linear, structurize_sequence_with};
use spcv_core::PointCloud;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::resample::resample;
use crate::{EvaluateArgs, ExportArgs, FileFormat, FixtureArgs, FixtureKind, InterpolateArgs, StructurizeArgs};

pub struct Context {
    pub jobs: usize,
    pub quiet: bool,
}

impl Context {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

const POINT_EXTENSIONS: [&str; 5] = ["ply", "off", "xyz", "txt", "pts"];

/// Files in argument order; directories contribute their point cloud files
/// sorted by name.
pub fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(CliError::MissingInput(p.clone()));
        }
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| CliError::Io {
                path: p.clone(),
                source: e,
            })?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file()
                        && f.extension()
                            .and_then(|e| e.to_str())
                            .is_some_and(|e| POINT_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                })
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_clouds(paths: &[PathBuf]) -> Result<Vec<PointCloud>, CliError> {
    paths
        .iter()
        .map(|p| read_point_cloud(p, None).map_err(|e| with_path(e, p)))
        .collect()
}

fn with_path(e: spcv_core::Error, p: &Path) -> CliError {
    match e {
        spcv_core::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(p.to_path_buf()),
        spcv_core::Error::Io(io) => CliError::Io {
            path: p.to_path_buf(),
            source: io,
        },
        other => CliError::Core(other),
    }
}

fn read_container(p: &Path) -> Result<SpcvContainer, CliError> {
    if !p.exists() {
        return Err(CliError::MissingInput(p.to_path_buf()));
    }
    read_spcv(p).map_err(|e| with_path(e, p))
}

fn emit(report: Option<&Path>, text: &str) -> Result<(), CliError> {
    match report {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn file_label(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Map `f` over `items` on up to `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn smoothness_records(
    frames: &[spcv_core::frame::SpcvFrame],
    windows: &[usize],
    ctx: &Context,
) -> Result<String, CliError> {
    let reports: Vec<spcv_core::Result<SmoothnessReport>> =
        par_map(frames, ctx.jobs, |f| smoothness_report(f, windows));
    let mut s = String::new();
    for (t, r) in reports.into_iter().enumerate() {
        s.push_str(&r?.to_records(t));
    }
    Ok(s)
}

pub fn structurize(cfg: &mut RunConfig, a: StructurizeArgs, ctx: &Context) -> Result<(), CliError> {
    if !a.inputs.is_empty() {
        cfg.inputs = a.inputs;
    }
    if cfg.inputs.is_empty() {
        return Err(CliError::Usage("structurize needs at least one input".into()));
    }
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    if let Some(c) = a.cols {
        cfg.cols = c;
    }
    if a.output.is_some() {
        cfg.output = a.output;
    }
    if a.report.is_some() {
        cfg.report = a.report;
    }
    let output = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Usage("structurize needs --output".into()))?;
    let frame_cfg = cfg.frame_fit()?;
    let seq_cfg = cfg.seq_fit()?;

    let paths = expand_inputs(&cfg.inputs)?;
    if paths.is_empty() {
        return Err(CliError::Usage("no point cloud files among the inputs".into()));
    }
    let originals = load_clouds(&paths)?;
    let n = cfg.rows * cfg.cols;
    let mut frames = Vec::with_capacity(originals.len());
    let mut duplicated = Vec::with_capacity(originals.len());
    for (t, pc) in originals.iter().enumerate() {
        let r = resample(pc, n, cfg.seed.wrapping_add(t as u64)).map_err(|e| e.in_frame(t))?;
        duplicated.push(r.duplicated);
        frames.push(r.cloud);
    }
    let names: Vec<String> = paths.iter().map(|p| file_label(p)).collect();
    ctx.progress(format!(
        "structurizing {} frame(s) into {}x{} grids",
        frames.len(),
        cfg.rows,
        cfg.cols
    ));
    let fit = structurize_sequence_with(&frames, &names, cfg.rows, cfg.cols, &frame_cfg, &seq_cfg, cfg.seed, |t| {
        ctx.progress(format!("frame {t} done"))
    })?;
    write_spcv(&fit.container, &output).map_err(|e| with_path(e, &output))?;

    let transform = fit.container.transform;
    let normalized: Vec<PointCloud> = originals.iter().map(|o| transform.apply(o)).collect();
    let mut rep = String::new();
    let _ = writeln!(
        rep,
        "record=run command=structurize frames={} rows={} cols={} seed={} metric={}",
        frames.len(),
        cfg.rows,
        cfg.cols,
        cfg.seed,
        frame_cfg.metric.kind.name()
    );
    let _ = writeln!(
        rep,
        "record=transform center_x={:e} center_y={:e} center_z={:e} scale={:e}",
        transform.center[0], transform.center[1], transform.center[2], transform.scale
    );
    for (t, report) in fit.reports.iter().enumerate() {
        let _ = writeln!(
            rep,
            "record=fit frame={t} source={} points_in={} duplicated={} steps={} distance={:e} regularizer={:e}",
            names[t],
            originals[t].len(),
            duplicated[t],
            report.loss_curve.len(),
            report.final_distance,
            report.final_regularizer
        );
    }
    let fidelity = fidelity_report(fit.container.frames(), &normalized, &transform, false, &cfg.uniformity())?;
    rep.push_str(&fidelity.to_records());
    rep.push_str(&smoothness_records(fit.container.frames(), &cfg.evaluate.windows, ctx)?);
    if a.gt_correspondence && frames.len() > 1 {
        let consistency = temporal_consistency_ratio(fit.container.frames(), &normalized, &cfg.evaluate.ks)?;
        rep.push_str(&consistency.to_records());
    }
    emit(cfg.report.as_deref(), &rep)
}

pub fn evaluate(cfg: &RunConfig, a: EvaluateArgs, ctx: &Context) -> Result<(), CliError> {
    let container = read_container(&a.spcv)?;
    let windows = a.windows.unwrap_or_else(|| cfg.evaluate.windows.clone());
    let ks = a.ks.unwrap_or_else(|| cfg.evaluate.ks.clone());
    let originals = if a.originals.is_empty() {
        Vec::new()
    } else {
        load_clouds(&expand_inputs(&a.originals)?)?
    };
    if !originals.is_empty() && originals.len() != container.len() {
        return Err(CliError::Core(spcv_core::Error::InvalidInput(format!(
            "container has {} frames but {} originals were given",
            container.len(),
            originals.len()
        ))));
    }
    if a.gt_correspondence && originals.is_empty() {
        return Err(CliError::Usage("--gt-correspondence needs --originals".into()));
    }
    let (rows, cols) = container.dims();
    let mut rep = String::new();
    let _ = writeln!(
        rep,
        "record=run command=evaluate frames={} rows={rows} cols={cols}",
        container.len()
    );
    rep.push_str(&smoothness_records(container.frames(), &windows, ctx)?);
    if !originals.is_empty() {
        let transform = container.transform;
        let fidelity = if a.denormalize {
            fidelity_report(container.frames(), &originals, &transform, true, &cfg.uniformity())?
        } else {
            let normalized: Vec<PointCloud> = originals.iter().map(|o| transform.apply(o)).collect();
            fidelity_report(container.frames(), &normalized, &transform, false, &cfg.uniformity())?
        };
        rep.push_str(&fidelity.to_records());
        if a.gt_correspondence && container.len() > 1 {
            let gt: Vec<PointCloud> = originals.iter().map(|o| transform.apply(o)).collect();
            rep.push_str(&temporal_consistency_ratio(container.frames(), &gt, &ks)?.to_records());
        }
    }
    emit(a.report.as_deref(), &rep)
}

pub fn interpolate(_cfg: &RunConfig, a: InterpolateArgs) -> Result<(), CliError> {
    let container = read_container(&a.spcv)?;
    if !(a.t1 < a.t2 && a.t2 < container.len()) {
        return Err(CliError::Core(spcv_core::Error::InvalidInput(format!(
            "need t1 < t2 < {}, got t1={} t2={}",
            container.len(),
            a.t1,
            a.t2
        ))));
    }
    let references = if a.reference.is_empty() {
        Vec::new()
    } else {
        load_clouds(&expand_inputs(&a.reference)?)?
    };
    if !references.is_empty() && references.len() != a.count {
        return Err(CliError::Usage(format!(
            "{} reference clouds for {} inserted frames",
            references.len(),
            a.count
        )));
    }
    let (f1, f2) = (&container.frames()[a.t1], &container.frames()[a.t2]);
    let (t1, t2) = (a.t1 as f64, a.t2 as f64);
    let mut timeline: Vec<(f64, spcv_core::frame::SpcvFrame, FrameMeta)> = container
        .frames()
        .iter()
        .zip(container.meta())
        .enumerate()
        .map(|(t, (f, m))| (t as f64, f.clone(), m.clone()))
        .collect();
    let mut inserted = Vec::with_capacity(a.count);
    for i in 1..=a.count {
        let t = t1 + (t2 - t1) * i as f64 / (a.count + 1) as f64;
        let f = interpolate_linear(f1, f2, t1, t2, t)?;
        inserted.push((t, f.clone()));
        timeline.push((
            t,
            f,
            FrameMeta {
                source: format!("interpolated@{t}"),
                fit_loss: f64::NAN,
            },
        ));
    }
    // stable: an inserted frame never shares a time with an existing one
    timeline.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = SpcvContainer::new(container.dims().0, container.dims().1, container.transform)?;
    for (_, f, m) in timeline {
        out.push(f, m)?;
    }
    write_spcv(&out, &a.output).map_err(|e| with_path(e, &a.output))?;

    let mut rep = String::new();
    let _ = writeln!(
        rep,
        "record=run command=interpolate t1={} t2={} count={} frames={}",
        a.t1,
        a.t2,
        a.count,
        out.len()
    );
    for (i, (t, f)) in inserted.iter().enumerate() {
        let _ = write!(rep, "record=interpolated index={i} time={t:e}");
        if let Some(r) = references.get(i) {
            let cd = chamfer(&reproject(f), &container.transform.apply(r));
            let _ = write!(rep, " cd={cd:e}");
        }
        rep.push('\n');
    }
    emit(a.report.as_deref(), &rep)
}

pub fn export(a: ExportArgs) -> Result<(), CliError> {
    let container = read_container(&a.spcv)?;
    let q = quantize_frames(&container, a.bits)?;
    let paths = export_codec_frames(&q, &a.dir).map_err(|e| with_path(e, &a.dir))?;
    let expected = dequantize_frames(&q)?;
    let back = dequantize_frames(&import_codec_frames(&a.dir)?)?;
    let lossless = back.frames() == expected.frames();
    let cd_mean = container
        .frames()
        .iter()
        .zip(back.frames())
        .map(|(a, b)| chamfer(&reproject(a), &reproject(b)))
        .sum::<f64>()
        / container.len() as f64;
    let bound = q.error_bound();
    let mut rep = String::new();
    let _ = writeln!(
        rep,
        "record=run command=export frames={} bits={} files={}",
        container.len(),
        a.bits,
        paths.len()
    );
    let _ = writeln!(
        rep,
        "record=export max_error_x={:e} max_error_y={:e} max_error_z={:e} reimport_lossless={lossless} reimport_cd={cd_mean:e}",
        bound[0], bound[1], bound[2]
    );
    emit(a.report.as_deref(), &rep)
}

pub fn make_fixture(cfg: &RunConfig, a: FixtureArgs, ctx: &Context) -> Result<(), CliError> {
    let clouds = match a.kind {
        FixtureKind::Plane => vec![plane(a.rows, a.cols)?],
        FixtureKind::Sphere => vec![sphere(a.points, cfg.seed)?],
        FixtureKind::TranslatingSphere => translating_sphere(a.points, a.frames, a.step, cfg.seed)?,
        FixtureKind::BendingCylinder => bending_cylinder(
            &CylinderParams {
                rings: a.rings,
                per_ring: a.per_ring,
                radius: a.radius,
                length: a.length,
                max_curvature: a.max_curvature,
            },
            a.frames,
        )?,
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let ext = match a.format {
        FileFormat::PlyBinaryLe => "ply",
        FileFormat::Xyz => "xyz",
    };
    let mut meta = String::new();
    let kind = match a.kind {
        FixtureKind::Plane => "plane",
        FixtureKind::Sphere => "sphere",
        FixtureKind::TranslatingSphere => "translating-sphere",
        FixtureKind::BendingCylinder => "bending-cylinder",
    };
    let _ = writeln!(meta, "kind={kind}");
    let _ = writeln!(meta, "seed={}", cfg.seed);
    let _ = writeln!(meta, "frames={}", clouds.len());
    let _ = writeln!(meta, "points={}", clouds[0].len());
    let _ = writeln!(meta, "correspondence=index-aligned");
    for (t, pc) in clouds.iter().enumerate() {
        let name = format!("{t:06}.{ext}");
        let path = a.out.join(&name);
        match a.format {
            FileFormat::PlyBinaryLe => write_ply_binary(&path, pc),
            FileFormat::Xyz => write_xyz(&path, pc),
        }
        .map_err(|e| with_path(e, &path))?;
        let _ = writeln!(meta, "frame={name}");
    }
    let meta_path = a.out.join("correspondence.meta");
    fs::write(&meta_path, meta).map_err(|e| CliError::Io {
        path: meta_path,
        source: e,
    })?;
    ctx.progress(format!("wrote {} frame(s) to {}", clouds.len(), a.out.display()));
    Ok(())
}
