//! `fogcap` command-line front end.
//!
//! ```text
//! fogcap <sweep|optimize|d-sweep|trace-stats|reproduce> --config <path>
//!        [--svg] [--out <dir>] [--seed <u64>] [--slots <n>]
//! ```
//!
//! Exit status: 0 when every computation completed and every feasibility
//! check passed, 2 when artifacts were written but some check failed,
//! 1 on configuration or I/O errors.

pub mod config;
pub mod output;
mod run;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, LoadedConfig, RunConfig};
pub use run::{execute, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulated loss and Markov bound over an alpha grid.
    Sweep,
    /// Optimal split for one estimator.
    Optimize,
    /// Optimal split versus deadline for several estimators.
    DSweep,
    /// Autocovariance of a request trace.
    TraceStats,
    /// Regenerate one of the reference figures.
    Reproduce,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::DSweep => "d_sweep",
            Command::TraceStats => "trace_stats",
            Command::Reproduce => "reproduce",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fogcap", version, about = "Capacity split between shallow and deep edge cloudlets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also render SVG line charts.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base random seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Simulated slots (overrides `n_slots`).
    #[arg(long, global = true)]
    pub slots: Option<usize>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("check failed: {f}");
            }
            if outcome.failures.is_empty() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run_cli(cli: &Cli) -> anyhow::Result<Outcome> {
    let Some(path) = &cli.config else {
        anyhow::bail!("--config <path> is required");
    };
    let mut loaded = LoadedConfig::read(path)?;
    let kind = loaded.config.experiment.kind();
    if kind != cli.command.kind() {
        return Err(loaded
            .error_at(
                "kind",
                format!("experiment kind `{kind}` does not match subcommand `{}`", cli.command.kind()),
            )
            .into());
    }
    if let Some(out) = &cli.out {
        loaded.config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
    }
    if let Some(slots) = cli.slots {
        loaded.config.n_slots = slots;
    }
    execute(&loaded, cli.svg)
}
