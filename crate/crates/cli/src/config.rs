//! Run configuration: a TOML file whose every key is optional.
//!
//! ```toml
//! rows = 64
//! cols = 64
//! seed = 0
//!
//! [frame]
//! steps = 5000
//! learning_rate = 1e-3
//!
//! [sequence]
//! lambda = 10.0
//!
//! [metric]
//! kind = "chamfer"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spcv_core::autodiff::GeneratorArch;
use spcv_core::frame::{FrameFitConfig, LrSchedule};
use spcv_core::metrics::{MetricConfig, MetricKind, SinkhornConfig};
use spcv_core::quality::{UniformityConfig, DEFAULT_WINDOWS};
use spcv_core::sequence::SeqFitConfig;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Grid rows `U`.
    pub rows: usize,
    /// Grid columns `V`.
    pub cols: usize,
    pub seed: u64,
    /// Input point cloud files, in frame order.
    pub inputs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub frame: FrameSection,
    pub sequence: SequenceSection,
    pub metric: MetricSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            seed: 0,
            inputs: Vec::new(),
            output: None,
            report: None,
            frame: FrameSection::default(),
            sequence: SequenceSection::default(),
            metric: MetricSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub lambda_s: f64,
    pub lambda_n: f64,
    pub window: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one.
    pub lr_floor: f64,
    /// Fraction of steps spent in linear warmup.
    pub warmup: f64,
    pub layers: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub sine_freq: f64,
    pub first_layer_gain: f64,
    /// Stop once the total loss is at or below this.
    pub tolerance: f64,
}

impl Default for FrameSection {
    fn default() -> Self {
        let f = FrameFitConfig::default();
        let (lr_floor, warmup) = match f.schedule {
            LrSchedule::Cosine { floor, warmup } => (floor, warmup),
            LrSchedule::Constant => (1.0, 0.0),
        };
        Self {
            lambda_s: f.lambda_s,
            lambda_n: f.lambda_n,
            window: f.window,
            steps: f.steps,
            learning_rate: f.learning_rate,
            lr_floor,
            warmup,
            layers: f.arch.layers,
            hidden: f.arch.hidden,
            kernel: f.arch.kernel,
            sine_freq: f.arch.sine_freq,
            first_layer_gain: f.arch.first_layer_gain,
            tolerance: f.tolerance,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    pub lambda: f64,
    pub k: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub lr_floor: f64,
    pub weight_floor: f64,
    pub tolerance: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        let s = SeqFitConfig::default();
        let lr_floor = match s.schedule {
            LrSchedule::Cosine { floor, .. } => floor,
            LrSchedule::Constant => 1.0,
        };
        Self {
            lambda: s.lambda,
            k: s.k,
            steps: s.steps,
            learning_rate: s.learning_rate,
            lr_floor,
            weight_floor: s.weight_floor,
            tolerance: s.tolerance,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// `chamfer`, `emd-exact` or `emd-sinkhorn`.
    pub kind: String,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_epsilon_start: f64,
    pub sinkhorn_iterations: usize,
    pub sinkhorn_tolerance: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        let m = MetricConfig::default();
        Self {
            kind: m.kind.name().to_string(),
            sinkhorn_epsilon: m.sinkhorn.epsilon,
            sinkhorn_epsilon_start: m.sinkhorn.epsilon_start,
            sinkhorn_iterations: m.sinkhorn.iterations,
            sinkhorn_tolerance: m.sinkhorn.tolerance,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Smoothness window sizes.
    pub windows: Vec<usize>,
    /// Consistency neighborhood sizes.
    pub ks: Vec<usize>,
    pub mnuc_disks: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            windows: DEFAULT_WINDOWS.to_vec(),
            ks: vec![1, 4, 8, 16],
            mnuc_disks: UniformityConfig::default().num_disks,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
            _ => CliError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        Self::parse(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn metric(&self) -> Result<MetricConfig, CliError> {
        let m = &self.metric;
        let cfg = MetricConfig {
            kind: MetricKind::parse(&m.kind)?,
            sinkhorn: SinkhornConfig {
                epsilon: m.sinkhorn_epsilon,
                epsilon_start: m.sinkhorn_epsilon_start,
                iterations: m.sinkhorn_iterations,
                tolerance: m.sinkhorn_tolerance,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn frame_fit(&self) -> Result<FrameFitConfig, CliError> {
        let f = &self.frame;
        let cfg = FrameFitConfig {
            lambda_s: f.lambda_s,
            lambda_n: f.lambda_n,
            window: f.window,
            metric: self.metric()?,
            steps: f.steps,
            learning_rate: f.learning_rate,
            schedule: LrSchedule::Cosine {
                floor: f.lr_floor,
                warmup: f.warmup,
            },
            arch: GeneratorArch {
                layers: f.layers,
                hidden: f.hidden,
                kernel: f.kernel,
                sine_freq: f.sine_freq,
                first_layer_gain: f.first_layer_gain,
            },
            tolerance: f.tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seq_fit(&self) -> Result<SeqFitConfig, CliError> {
        let s = &self.sequence;
        let cfg = SeqFitConfig {
            lambda: s.lambda,
            k: s.k,
            metric: self.metric()?,
            steps: s.steps,
            learning_rate: s.learning_rate,
            schedule: LrSchedule::Cosine {
                floor: s.lr_floor,
                warmup: 0.0,
            },
            weight_floor: s.weight_floor,
            tolerance: s.tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn uniformity(&self) -> UniformityConfig {
        UniformityConfig {
            num_disks: self.evaluate.mnuc_disks,
            seed: self.seed,
            ..Default::default()
        }
    }
}
