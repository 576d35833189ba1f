//! Command-line driver for the `nanol` filters.
//!
//! Subcommands simulate a single run, run Monte-Carlo campaigns, replay
//! recorded sensor logs, compare result directories and re-render plots.
//! Every command is deterministic given its configuration and seeds.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "nanol", version, about = "Natural-gradient and invariant EKF filtering on Lie groups")]
pub struct Cli {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; bundles go to `<out>/<run_id>/`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated filter names (nano, inekf).
    #[arg(long, global = true, value_delimiter = ',')]
    pub filters: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Worker threads for Monte-Carlo trials.
    #[arg(long, global = true, env = "NANO_L_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory, run the filters and write a bundle.
    Simulate,
    /// Run a landmark Monte-Carlo campaign.
    Montecarlo,
    /// Run the filters over a recorded sensor log.
    Replay {
        #[arg(long)]
        sensor_log: Option<PathBuf>,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Print ATE/RE of every filter across dataset directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Re-render the SVG plots of a bundle from its summary.json.
    Plot { run_dir: PathBuf },
}

impl Cli {
    fn overrides(&self) -> commands::Overrides {
        commands::Overrides {
            out: self.out.clone(),
            trials: self.trials,
            seed: self.seed,
            filters: self.filters.clone(),
            max_iters: self.max_iters,
        }
    }
}

/// Executes a parsed command line and returns what should be printed.
pub fn run(cli: Cli) -> Result<String> {
    let cfg = || commands::resolve_config(cli.config.as_deref(), &cli.overrides());
    match &cli.command {
        Command::Simulate => Ok(commands::cmd_simulate(&cfg()?)?.display().to_string()),
        Command::Montecarlo => {
            let cfg = cfg()?;
            let dir = match cli.threads {
                Some(0) => return Err(CliError::config("--threads", ".", "must be at least 1")),
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Other(e.to_string()))?
                    .install(|| commands::cmd_montecarlo(&cfg))?,
                None => commands::cmd_montecarlo(&cfg)?,
            };
            Ok(dir.display().to_string())
        }
        Command::Replay {
            sensor_log,
            ground_truth,
        } => {
            let mut cfg = cfg()?;
            if sensor_log.is_some() {
                cfg.sensor_log = sensor_log.clone();
            }
            if ground_truth.is_some() {
                cfg.ground_truth = ground_truth.clone();
            }
            Ok(commands::cmd_replay(&cfg)?.display().to_string())
        }
        Command::Compare { dirs } => {
            let cfg = cfg()?;
            commands::cmd_compare(dirs, cfg.re_window)
        }
        Command::Plot { run_dir } => {
            let written = commands::cmd_plot(run_dir)?;
            Ok(written
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join("\n"))
        }
    }
}
