//! Experiment configuration, read from TOML.
//!
//! Every block except `problem` and `uncertainty` has defaults, so a minimal
//! file names a problem, an uncertainty set and the number of iterations.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Number of macro-iterations `K`.
    pub iterations: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub inner_solver: InnerSolver,
    #[serde(default)]
    pub warm_start: WarmStartChoice,
    pub problem: ProblemConfig,
    pub uncertainty: UncertaintyConfig,
    #[serde(default)]
    pub md: MdBlock,
    #[serde(default)]
    pub tma: TmaBlock,
    #[serde(default)]
    pub cpi: CpiBlock,
    #[serde(default)]
    pub dual: DualBlock,
    #[serde(default)]
    pub sampling: SamplingBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    #[default]
    Tma,
    Cpi,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartChoice {
    #[default]
    Previous,
    Nominal,
}

/// Where the RCMDP comes from: a spec file or one of the built-in generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Path relative to the config file's directory unless absolute.
    File { path: PathBuf },
    Random {
        states: usize,
        actions: usize,
        constraints: usize,
        gamma: f64,
        seed: u64,
    },
    Slater { gamma: f64, seed: u64 },
    Tension { gamma: f64 },
    Inventory { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    L1,
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyConfig {
    Rect {
        norm: NormChoice,
        radius: f64,
        /// Distortion group of each state for the sweep; one group per state when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<Vec<usize>>,
    },
    NonRect { budget: f64 },
}

/// Policy mirror-descent settings.
///
/// With neither `eta` nor `alpha` the theory settings are used (they need
/// at least one constraint). With only `alpha`, `eta = (1 - gamma) / alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Inner steps per macro-iteration, or the base count when `inner_scale` is set.
    pub inner_iterations: usize,
    /// Adds `ceil(inner_scale * ln(max(1, ||lambda||_1)))` steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_scale: Option<f64>,
}

impl Default for MdBlock {
    fn default() -> Self {
        MdBlock {
            eta: None,
            alpha: None,
            inner_iterations: 10,
            inner_scale: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    Fixed,
    #[default]
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TmaBlock {
    pub eta_p0: f64,
    pub alpha_p: f64,
    pub schedule: ScheduleChoice,
    pub steps: usize,
    pub eta_p_max: f64,
}

impl Default for TmaBlock {
    fn default() -> Self {
        TmaBlock {
            eta_p0: 0.1,
            alpha_p: 1.0,
            schedule: ScheduleChoice::Geometric,
            steps: 30,
            eta_p_max: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpiBlock {
    pub eps_prime: f64,
    pub max_iters: usize,
}

impl Default for CpiBlock {
    fn default() -> Self {
        CpiBlock {
            eps_prime: 1e-3,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualChoice {
    #[default]
    Augmented,
    Clipped,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualBlock {
    pub mode: DualChoice,
    pub eta_lambda: f64,
    /// Hard ceiling on augmented multipliers; exceeding it is an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Clipping level, required in clipped mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
}

impl Default for DualBlock {
    fn default() -> Self {
        DualBlock {
            mode: DualChoice::Augmented,
            eta_lambda: 1.0,
            bound: None,
            lambda_max: None,
        }
    }
}

/// Monte-Carlo sizes for sampled mode.
///
/// Counts left out are derived from `eps` and `delta` with the sample-size
/// formulas; `lambda_l1` is the multiplier mass assumed when sizing the Q
/// estimator and the G horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingBlock {
    pub eps: f64,
    pub delta: f64,
    pub lambda_l1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_g: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_g: Option<usize>,
}

impl Default for SamplingBlock {
    fn default() -> Self {
        SamplingBlock {
            eps: 0.1,
            delta: 0.1,
            lambda_l1: 1.0,
            m_v: None,
            n_v: None,
            m_q: None,
            n_q: None,
            m_g: None,
            n_g: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub levels: Vec<f64>,
    pub lambda_max: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            lambda_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub run_csv: String,
    pub sweep_csv: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("out"),
            run_csv: "run.csv".into(),
            sweep_csv: "sweep.csv".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| HarnessError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
