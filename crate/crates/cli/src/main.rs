use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use prognosis::config::PipelineConfig;
use prognosis::pipeline::{Command, Pipeline};

/// Outcome prediction pipeline over ICU time series and EHR tables.
#[derive(Parser)]
#[command(name = "prognosis", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate a synthetic cohort into <output>/cohort.
    Synth,
    /// Select patients, derive labels and clean the vital-sign series.
    Preprocess,
    /// Extract time-series features from the cleaned series.
    Features,
    /// Drop sparse EHR columns and impute the rest.
    Impute,
    /// Nested cross-validation of every enabled learner.
    Evaluate,
    /// Min-depth feature ranking from a forest fit on all patients.
    Rank,
    /// Every stage in order.
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Preprocess => Command::Preprocess,
            Cmd::Features => Command::Features,
            Cmd::Impute => Command::Impute,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Rank => Command::Rank,
            Cmd::All => Command::All,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::read(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = cli.output {
        config.output.directory = dir;
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let workers = config.workers()?;
    let pipeline = Pipeline::new(config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    for line in pool.install(|| pipeline.run(cli.command.into()))? {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
