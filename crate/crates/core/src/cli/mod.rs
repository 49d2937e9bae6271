//! Command-line driver: `simulate`, `train`, `sweep`, `hyperopt`, `report`.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{
    cmd_hyperopt, cmd_report, cmd_simulate, cmd_sweep, cmd_train, Context, DatasetEntry, DatasetManifest,
    HyperoptResult, RunStamp, TrainedUnit,
};
pub use config::{HyperoptSettings, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fibereq", version, about = "DP-16QAM long-haul link simulator with DBP and neural equalizers")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Replace the configured seed list with this single seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads for every parallel stage [default: available cores].
    #[arg(long, global = true, value_name = "N", env = "FIBEREQ_THREADS")]
    pub threads: Option<usize>,

    /// Output directory, overriding `output_dir` of the configuration.
    #[arg(long, global = true, value_name = "DIR", env = "FIBEREQ_OUTPUT_DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate train/validation/test datasets for every power and seed.
    Simulate,
    /// Train one neural equalizer on the simulated datasets.
    Train {
        /// mlp, bilstm or crnn.
        equalizer: String,
    },
    /// Launch-power sweep over all configured equalizers, then `report`.
    Sweep {
        /// Keep the trained checkpoints and training logs under `<out>/models`.
        #[arg(long)]
        save_models: bool,
    },
    /// Bayesian hyperparameter search on the highest configured power.
    Hyperopt,
    /// Compare `results.csv` with the published curves and write the plot bundle.
    Report,
}

pub fn run(cli: Cli) -> Result<()> {
    let path = cli.config.ok_or_else(|| Error::Config {
        field: "--config".into(),
        msg: "a configuration file is required (see configs/desk.toml)".into(),
    })?;
    let ctx = Context::from_file(&path, cli.out, cli.seed)?;
    log::info!("configuration {} (hash {}), output {}", path.display(), ctx.hash, ctx.out.display());
    match cli.command {
        Command::Simulate => cmd_simulate(&ctx).map(|m| log::info!("{} dataset units ready", m.len())),
        Command::Train { equalizer } => cmd_train(&ctx, &equalizer).map(|u| log::info!("trained {} units", u.len())),
        Command::Sweep { save_models } => cmd_sweep(&ctx, save_models).map(|p| log::info!("{} result rows", p.len())),
        Command::Hyperopt => cmd_hyperopt(&ctx).map(|_| ()),
        Command::Report => cmd_report(&ctx).map(|_| ()),
    }
}
