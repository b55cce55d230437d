//! Resolved run configurations, written next to every run's outputs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use srla_core::agent::OptimizerKind;
use srla_core::pipeline::System;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FleetKind {
    /// One operating condition, one failure mode.
    SingleMode,
    /// Six operating regimes shifting every sensor.
    MultiRegime,
    /// Two failure modes planted on distinct sensors.
    TwoMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SystemArg {
    System1,
    System2,
    System3,
    System4,
    Srla,
}

impl From<SystemArg> for System {
    fn from(s: SystemArg) -> System {
        match s {
            SystemArg::System1 => System::System1,
            SystemArg::System2 => System::System2,
            SystemArg::System3 => System::System3,
            SystemArg::System4 => System::System4,
            SystemArg::Srla => System::Srla,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> OptimizerKind {
        match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    /// The trained pipeline in --model.
    Model,
    /// Never replace.
    Hold,
    /// Replace one cycle before the true failure.
    Oracle,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct CostArgs {
    /// Replacement cost c_r.
    #[arg(long, default_value_t = 100.0)]
    pub cr: f64,

    /// Failure cost c_f.
    #[arg(long, default_value_t = 1000.0)]
    pub cf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct SynthArgs {
    /// Number of units to generate.
    #[arg(long, default_value_t = 100)]
    pub units: usize,

    /// Degradation scenario.
    #[arg(long, value_enum, default_value_t = FleetKind::SingleMode)]
    pub kind: FleetKind,

    /// Fleet file name, relative to the output directory unless absolute.
    #[arg(short, long, default_value = "fleet.txt")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct TrainArgs {
    /// Training fleet in C-MAPSS text format.
    #[arg(long)]
    pub data: PathBuf,

    /// Feature pipeline to train.
    #[arg(long, value_enum, default_value_t = SystemArg::Srla)]
    pub system: SystemArg,

    /// Hidden-state counts; several values run a grid.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub states: Vec<usize>,

    #[command(flatten)]
    pub costs: CostArgs,

    /// Share of units used for training; the rest is held out for the summary.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,

    /// Seed of the train/test split (defaults to a stream of --seed).
    #[arg(long)]
    pub split_seed: Option<u64>,

    /// Agent training episodes.
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,

    /// EM iteration limit.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,

    /// EM stops when the log-likelihood gain falls below this.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,

    /// EM initialisations per model; the best final log-likelihood is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,

    /// Cycles before end of life whose decoded states join the gated set.
    #[arg(long, default_value_t = 30)]
    pub depth: usize,

    /// Discount factor.
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,

    /// Agent learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    /// Initial exploration rate.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon0: f64,

    /// Per-episode exploration decay factor.
    #[arg(long, default_value_t = 0.99)]
    pub epsilon_decay: f64,

    /// Hidden layer widths of the Q-network.
    #[arg(long, value_delimiter = ',', default_value = "128,256")]
    pub hidden: Vec<usize>,

    /// Q-network optimizer.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct EvalArgs {
    /// Fleet to evaluate, C-MAPSS text format.
    #[arg(long)]
    pub data: PathBuf,

    /// Trained pipeline file (required for --policy model).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Split file written by `train`; only its test units are evaluated.
    #[arg(long)]
    pub split: Option<PathBuf>,

    /// Replacement rule to evaluate.
    #[arg(long, value_enum, default_value_t = PolicyArg::Model)]
    pub policy: PolicyArg,

    #[command(flatten)]
    pub costs: CostArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct InterpretArgs {
    /// Fleet to interpret, C-MAPSS text format.
    #[arg(long)]
    pub data: PathBuf,

    /// Trained pipeline with a hidden-state model (system3, system4 or srla).
    #[arg(long)]
    pub model: PathBuf,

    /// Ground-truth sidecar from `synth`; enables the health mapping.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Unit whose RUL curve is exported (default: first unit).
    #[arg(long)]
    pub unit: Option<u32>,

    /// Monte-Carlo rollouts per RUL estimate.
    #[arg(long, default_value_t = 100)]
    pub rollouts: usize,

    /// Longest rollout before it counts as capped.
    #[arg(long, default_value_t = 1000)]
    pub horizon_cap: usize,

    /// Minimum share of units ending in a state for it to count as a failure state.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,

    /// Resample emissions and re-decode during RUL rollouts.
    #[arg(long)]
    pub resample: bool,

    /// L2 penalty of the importance classifier.
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    Synth(SynthArgs),
    Train(TrainArgs),
    Eval(EvalArgs),
    Interpret(InterpretArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub command: Command,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    if p.is_absolute() {
        Ok(p.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(p))
    }
}

impl RunConfig {
    /// Makes every path absolute so the file replays from anywhere.
    pub fn resolve(mut self) -> Result<RunConfig> {
        self.out_dir = absolute(&self.out_dir)?;
        match &mut self.command {
            Command::Synth(_) => {}
            Command::Train(a) => a.data = absolute(&a.data)?,
            Command::Eval(a) => {
                a.data = absolute(&a.data)?;
                a.model = a.model.as_deref().map(absolute).transpose()?;
                a.split = a.split.as_deref().map(absolute).transpose()?;
            }
            Command::Interpret(a) => {
                a.data = absolute(&a.data)?;
                a.model = absolute(&a.model)?;
                a.truth = a.truth.as_deref().map(absolute).transpose()?;
            }
        }
        Ok(self)
    }

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.out_dir.join(RUN_CONFIG_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
