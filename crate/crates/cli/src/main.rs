use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod commands;
mod config;

use config::{Command, EvalArgs, InterpretArgs, RunConfig, SynthArgs, TrainArgs};

/// Hidden-state health decoding and gated Q-learning for equipment replacement.
///
/// Every run writes `run_config.json` into the output directory; pass it to
/// `srla replay` to repeat the run.
#[derive(Parser)]
#[command(name = "srla", version)]
struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, env = "SRLA_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Run seed; every random stage draws from a named stream of it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Log more (repeat for debug output). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate a synthetic run-to-failure fleet (C-MAPSS text plus truth sidecar).
    Synth(SynthArgs),
    /// Train the hidden-state model and agent of a system, optionally over a state-count grid.
    Train(TrainArgs),
    /// Evaluate a trained pipeline or a reference policy on a fleet.
    Eval(EvalArgs),
    /// Failure states, feature importance, RUL curve, health mapping and 2-D projection.
    Interpret(InterpretArgs),
    /// Repeat a run from its run_config.json.
    Replay {
        /// Configuration written by an earlier run.
        config: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    let out_dir_given = std::env::args().any(|a| a == "--out-dir" || a.starts_with("--out-dir="))
        || std::env::var_os("SRLA_OUT_DIR").is_some();
    let command = match cli.command {
        Sub::Synth(a) => Command::Synth(a),
        Sub::Train(a) => Command::Train(a),
        Sub::Eval(a) => Command::Eval(a),
        Sub::Interpret(a) => Command::Interpret(a),
        Sub::Replay { config } => {
            let mut cfg = RunConfig::load(&config)?;
            if out_dir_given {
                cfg.out_dir = cli.out_dir;
            }
            return commands::run(&cfg.resolve()?);
        }
    };
    let cfg = RunConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cli.seed,
        out_dir: cli.out_dir,
        command,
    }
    .resolve()?;
    commands::run(&cfg)
}
