use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "faultadapt", version, about = "Train, adapt and evaluate agents under injected robot faults")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Seed list overriding the config, e.g. "0-29" or "0-4,9".
    #[arg(long, value_name = "RANGE")]
    pub seeds: Option<String>,
    /// Seeds run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Output root; falls back to the config's output_dir, then $FAULTADAPT_OUT, then ./runs.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase 1: train from scratch and save one checkpoint per seed.
    Train(RunArgs),
    /// Phases 2 and 3: inject the fault and continue from saved snapshots.
    Adapt {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint file, or a directory holding seed_<n>/checkpoint.ftrl.
        /// Defaults to the experiment's train directory.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
        /// 1 retain all, 2 retain model, 3 retain storage, 4 discard all.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        approach: Option<u8>,
    },
    /// Random hyperparameter search with two-step selection.
    Hpo {
        #[command(flatten)]
        run: RunArgs,
        /// Search space (JSON); defaults to the built-in space of the algorithm.
        #[arg(long, value_name = "PATH")]
        space: Option<PathBuf>,
        /// Number of config seeds drawn (0..budget).
        #[arg(long, default_value_t = 101)]
        budget: u64,
    },
    /// Aggregate finished runs into summary, savings, bar and heatmap tables.
    Report {
        /// Run directories or experiment directories containing them.
        #[arg(required = true, value_name = "DIR")]
        dirs: Vec<PathBuf>,
        /// Report directory; defaults to <first experiment>/report.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// State-visitation heatmaps of saved policies, healthy and under the fault.
    Heatmap {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint file or directory of seed_<n> checkpoints.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
    },
}
