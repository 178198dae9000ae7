use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpsteer::commands::{self, FitArgs, Method};
use gpsteer::CliResult;

/// Steering-vector interpolation: simulate scenes, fit models, evaluate them
/// and design MVDR beamformers from their predictions.
#[derive(Debug, Parser)]
#[command(name = "gpsteer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scene config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample observed directions and fit an interpolator.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_obs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        freq_subsample: Option<usize>,
    },
    /// Score a model against every direction of a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// MVDR beampatterns from model-predicted steering vectors.
    Beampattern {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Pattern CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Fit { dataset, method, config, out, n_obs, seed, freq_subsample } => {
            commands::fit(&FitArgs { dataset, method, config, out, n_obs, seed, freq_subsample })
        }
        Command::Evaluate { model, dataset, out, config } => commands::evaluate(&model, &dataset, &out, config.as_deref()),
        Command::Beampattern { model, dataset, out, config } => commands::beampattern_cmd(&model, &dataset, &out, config.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
