//! The `spcv` command line: structurize point cloud sequences into SPCV
//! containers, evaluate them, interpolate frames, export codec-ready images
//! and generate synthetic fixtures.

pub mod commands;
pub mod config;
pub mod error;
pub mod resample;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spcv", version, about = "Structured point cloud video pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "SPCV_CONFIG")]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for per-frame evaluation.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,

    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a sequence of point clouds into an SPCV container.
    Structurize(StructurizeArgs),
    /// Report smoothness, consistency and fidelity of a container.
    Evaluate(EvaluateArgs),
    /// Insert linearly interpolated frames between two frames.
    Interpolate(InterpolateArgs),
    /// Quantize a container and write one image per frame.
    Export(ExportArgs),
    /// Write a synthetic point cloud sequence.
    MakeFixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct StructurizeArgs {
    /// Point cloud files or directories, in frame order.
    pub inputs: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Input frames share vertex order; report temporal consistency.
    #[arg(long)]
    pub gt_correspondence: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub spcv: PathBuf,
    /// Original point clouds (files or directories), one per frame.
    #[arg(long, num_args = 1..)]
    pub originals: Vec<PathBuf>,
    /// Originals share vertex order; report temporal consistency.
    #[arg(long)]
    pub gt_correspondence: bool,
    /// Smoothness window sizes.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    /// Consistency neighborhood sizes.
    #[arg(long = "ks", value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Compare in source units instead of the unit box.
    #[arg(long)]
    pub denormalize: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    pub spcv: PathBuf,
    #[arg(long)]
    pub t1: usize,
    #[arg(long)]
    pub t2: usize,
    /// Frames to insert at uniform sub-steps between t1 and t2.
    #[arg(long)]
    pub count: usize,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Held-out clouds (source units) to compare the inserted frames against.
    #[arg(long, num_args = 1..)]
    pub reference: Vec<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub spcv: PathBuf,
    /// Sample depth: 10 or 16.
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    Plane,
    Sphere,
    TranslatingSphere,
    BendingCylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    PlyBinaryLe,
    Xyz,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    pub kind: FixtureKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Points per frame (sphere kinds).
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    /// Per-frame shift along x (translating sphere).
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Grid rows (plane).
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    /// Grid columns (plane).
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, default_value_t = 64)]
    pub rings: usize,
    #[arg(long, default_value_t = 32)]
    pub per_ring: usize,
    #[arg(long, default_value_t = 0.12)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 2.5)]
    pub max_curvature: f64,
    #[arg(long, value_enum, default_value_t = FileFormat::PlyBinaryLe)]
    pub format: FileFormat,
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ctx = commands::Context {
        jobs: cli.jobs as usize,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Structurize(a) => commands::structurize(&mut cfg, a, &ctx),
        Command::Evaluate(a) => commands::evaluate(&cfg, a, &ctx),
        Command::Interpolate(a) => commands::interpolate(&cfg, a),
        Command::Export(a) => commands::export(a),
        Command::MakeFixture(a) => commands::make_fixture(&cfg, a, &ctx),
    }
}
