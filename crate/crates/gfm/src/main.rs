use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gfm::commands;
use gfm::config::ExperimentConfig;
use gfm::pool::{resolve_workers, Pool};
use gfm::run::{run_experiment, write_outputs};
use gfm_core::clustering::ClusterMethod;
use gfm_core::synth::SynthSpec;

#[derive(Parser)]
#[command(name = "gfm", version, about = "Localised global forecasting models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON); a run manifest also works.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; GFM_WORKERS takes precedence.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn pool(&self) -> Result<(Pool, usize)> {
        let workers = resolve_workers(self.workers);
        Ok((Pool::new(workers)?, workers))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write features.csv for the training portions.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        standardized: bool,
    },
    /// Write labels.csv for one clustering.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "kmeans")]
        method: String,
        /// Cluster count; the elbow choice when omitted.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run every configured variant and write forecasts, metrics and the manifest.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Score a forecasts file against the configured dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        forecasts: PathBuf,
    },
    /// Friedman, Wilcoxon and Holm over a long dataset,model,mean_smape table.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a spec (JSON).
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn read_spec(path: &Path, seed: Option<u64>) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec: SynthSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features { common, standardized } => {
            commands::features(&common.load()?, standardized, &common.out)?;
        }
        Command::Cluster { common, method, k } => {
            let method: ClusterMethod = method.parse()?;
            let (pool, _) = common.pool()?;
            commands::cluster(&common.load()?, method, k, &common.out, &pool)?;
        }
        Command::Run { common } => {
            let cfg = common.load()?;
            let (pool, workers) = common.pool()?;
            let outputs = run_experiment(&cfg, workers, &pool)?;
            write_outputs(&common.out, &outputs).context("stage `write`")?;
            for w in &outputs.manifest.run.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Evaluate { common, forecasts } => {
            commands::evaluate_file(&common.load()?, &forecasts, &common.out)?;
        }
        Command::Stats { input, out } => commands::stats_file(&input, &out)?,
        Command::Synth { config, out, seed } => commands::synth(&read_spec(&config, seed)?, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
