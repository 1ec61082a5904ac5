//! `snf`: invariant suites, target fits, toy-VAE training and parameter counts.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snf_core::suites::Suite;

pub const EXIT_PROPERTY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;

/// A failure together with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn property(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PROPERTY,
            message: message.into(),
        }
    }

    /// Divergence during training exits with 3; anything else the library
    /// rejects stems from the configuration.
    pub fn from_core(e: snf_core::Error) -> Self {
        let code = match e {
            snf_core::Error::Divergence { .. } => EXIT_DIVERGENCE,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "snf", version, about = "Sylvester normalizing flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a property suite over a seeded grid of random instances.
    Check {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated latent dimensions.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 5, 8])]
        dims: Vec<usize>,
        /// Random instances per dimension and check.
        #[arg(long, default_value_t = 20)]
        cases: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Fit an amortized posterior to a Gaussian target.
    FitTarget {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Train the toy VAE on binarized bars and report its NLL.
    TrainVae {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configuration's importance samples per image.
        #[arg(long)]
        importance_samples: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Compare closed-form and enumerated parameter counts for every variant.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check {
            suite,
            seed,
            dims,
            cases,
            out,
            force,
        } => commands::check(suite, seed, dims, cases, out.as_deref(), force),
        Command::FitTarget {
            config,
            out,
            seed,
            force,
        } => commands::fit_target(&config, &out, seed, force),
        Command::TrainVae {
            config,
            out,
            seed,
            importance_samples,
            force,
        } => commands::train_vae(&config, &out, seed, importance_samples, force),
        Command::Params { config } => commands::params(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snf: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
