//! `ipkp`: render knowledge prototypes, pre-train on them, fine-tune, run
//! sweeps and rebuild reports.
//!
//! Exit status: 0 success, 1 runtime failure, 2 configuration or usage error,
//! 3 training diverged.

mod commands;
mod error;
mod preview;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ipkp", version, about = "Informed pre-training on knowledge prototypes")]
pub struct Cli {
    /// TOML config; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "ipkp-out")]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a prototype spec to an IDX pair and `proto_<class>.png` previews.
    RenderProtos {
        /// Graph spec file; defaults to `dataset.prototypes`.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Side length in pixels; defaults to `dataset.resolution`.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Pre-train LeNet-5 on the knowledge prototypes and write a checkpoint.
    Pretrain {
        /// Prototypes per class after augmentation (1 = unaugmented).
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Fine-tune on a training subset and report test accuracy.
    Finetune {
        /// `fresh` or `checkpoint:<path>`.
        #[arg(long, default_value = "fresh")]
        init: String,
        /// Keep only the first K parameterized layers of the initial model.
        #[arg(long)]
        truncate_k: Option<usize>,
        /// Training fraction; defaults to the first `experiment.fractions` entry.
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        repetition: usize,
    },
    /// Run a sweep and write its report.
    Sweep {
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Rebuild tables and charts from a sweep directory.
    Report {
        /// Directory holding `results.csv` (and `curves/`, `checkpoints/`).
        dir: PathBuf,
        /// Re-evaluate retained checkpoints on the out-of-distribution set.
        #[arg(long)]
        ood: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Size,
    Augment,
    Layers,
    Informed,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
