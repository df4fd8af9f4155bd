//! `dmtl`: generate synthetic data, train, evaluate and run the ablation
//! comparison for the multi-task network in `dmtl-core`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<dmtl_core::Error> for CliError {
    fn from(e: dmtl_core::Error) -> Self {
        match e {
            dmtl_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dmtl",
    version,
    about = "Multi-task nominal/ordinal attribute learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` config file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Base directory for relative paths in the config.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write a synthetic correlated-attribute dataset.
    GenData,
    /// Train on the train split; write model, trace and test metrics.
    Train,
    /// Score a saved model on a dataset.
    Eval,
    /// Train every ablation mode over the configured seeds.
    Ablation,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    let ctx = commands::Context {
        cfg,
        out_dir: cli.out_dir.clone(),
    };
    match cli.command {
        Command::GenData => commands::gen_data(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Ablation => commands::ablation(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dmtl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
