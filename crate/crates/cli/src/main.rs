//! Command-line front end for the two-layer contract market simulator.

mod artifacts;
mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use contract_market::config::{LayerChoice, ModeChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Agents observe the full joint market state
    Augmented,
    /// Agents observe only their own bundle's slice
    Naive,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Augmented => ModeChoice::Augmented,
            ModeArg::Naive => ModeChoice::Naive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayerArg {
    /// Data purchase from sensing devices
    Upstream,
    /// Digital twin sale to users
    Downstream,
}

impl From<LayerArg> for LayerChoice {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::Upstream => LayerChoice::Upstream,
            LayerArg::Downstream => LayerChoice::Downstream,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; built-in defaults apply when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config's seed list (repeat for several seeds)
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Override the observation mode
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Override the market layer
    #[arg(long, value_enum)]
    pub layer: Option<LayerArg>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory; falls back to $CONTRACT_MARKET_OUT, then the config
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    /// Run directory holding checkpoints_seed<seed> subdirectories
    pub run_dir: PathBuf,
    /// TOML run configuration the checkpoints were trained with
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict evaluation to these seeds (repeatable)
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Override the observation mode
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Override the market layer
    #[arg(long, value_enum)]
    pub layer: Option<LayerArg>,
    /// Evaluation episodes per distribution scenario
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
}

#[derive(Debug, Parser)]
#[command(
    name = "contract-market",
    version,
    about = "Two-layer contract market: train per-bundle pricing agents, solve exact grid optima, and report metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent per bundle; write metrics, best menu, and checkpoints
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exhaustively solve the optimal menu over the configured candidate grids
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tidy series, percentile summaries, and violation rates for a finished run
    Report {
        /// Directory containing metrics_seed<seed>.csv files
        run_dir: PathBuf,
    },
    /// Paired training with shared-state vs own-bundle observations
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate frozen policies under shifted type distributions
    Shift(ShiftArgs),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { run, out } => commands::cmd_train(&run, &out),
        Command::Oracle { run, out } => commands::cmd_oracle(&run, &out),
        Command::Report { run_dir } => commands::cmd_report(&run_dir),
        Command::Compare { run, out } => commands::cmd_compare(&run, &out),
        Command::Shift(args) => commands::cmd_shift(&args),
    }
}
