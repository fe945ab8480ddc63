//! Command-line frontend of the `gridsindy` pipeline.
//!
//! Exit status: 0 on success, 1 for data errors, 2 for configuration errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "gridsindy", version, about = "Sparse identification of power-grid frequency dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw; required by `synth`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gridsindy-out")]
    out: PathBuf,
    /// Raw recording for `ingest`, chunk store otherwise. Overrides the config.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a frequency recording into complete chunks.
    Ingest,
    /// Generate a synthetic swing-equation dataset.
    Synth,
    /// Compare smoothing bandwidths by simulation RMSE.
    SigmaSweep {
        /// Comma-separated candidates in seconds.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Fit one model per chunk.
    Fit,
    /// Fit, simulate and score every chunk.
    Evaluate,
    /// Sweep optimizer hyperparameters over a grid.
    Grid,
    /// Score a swing-equation integration against the data.
    Baseline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Synth => "synth",
            Command::SigmaSweep { .. } => "sigma-sweep",
            Command::Fit => "fit",
            Command::Evaluate => "evaluate",
            Command::Grid => "grid",
            Command::Baseline => "baseline",
        }
    }
}

#[derive(Debug)]
pub(crate) enum Failure {
    Config(String),
    Data(String),
}

impl From<gridsindy::Error> for Failure {
    fn from(e: gridsindy::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(input) = cli.common.input {
        config.input = Some(input);
    }
    let command = cli.command;
    let ctx = Context {
        command: command.name(),
        out: cli.common.out,
        seed: cli.common.seed,
        config,
    };
    let dispatch = move || match command {
        Command::Ingest => commands::ingest(&ctx),
        Command::Synth => commands::synth(&ctx),
        Command::SigmaSweep { sigmas } => commands::sigma_sweep(&ctx, sigmas),
        Command::Fit => commands::fit(&ctx),
        Command::Evaluate => commands::evaluate(&ctx),
        Command::Grid => commands::grid(&ctx),
        Command::Baseline => commands::baseline(&ctx),
    };
    match cli.common.jobs {
        None => dispatch(),
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Config(format!("cannot start {n} workers: {e}")))?
            .install(dispatch),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
