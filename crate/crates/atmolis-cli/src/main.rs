//! Command-line driver for retrieval experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atmolis::error::Error;
use atmolis::experiment::{load_config, ExperimentConfig, MethodName, CONFIG_TEMPLATE};
use atmolis::harness;

#[derive(Parser)]
#[command(name = "atmolis", version, about = "Trace-gas profile retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a commented configuration template.
    Init {
        /// Where to write the template.
        #[arg(long, short = 'c', default_value = "atmolis.toml")]
        config: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Generate the synthetic measurement and its provenance files.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one retrieval method end to end.
    Retrieve {
        #[command(flatten)]
        common: CommonArgs,
        /// Retrieval method: full, lis, or prired.
        #[arg(long)]
        method: Option<String>,
        /// Subspace rank for lis / prired.
        #[arg(long)]
        rank: Option<usize>,
        /// Singular-value threshold for lis (alternative to --rank).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Sweep both reduction methods over ranks against a full-space
    /// reference run.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute chain diagnostics for an existing run directory.
    Report {
        /// Run directory (for example out/retrieve_lis_r4).
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("cannot read config {}: {e}", path.display()),
                ))
            })?;
            load_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.display().to_string();
    }
    Ok(config)
}

fn apply_method_overrides(
    config: &mut ExperimentConfig,
    method: Option<String>,
    rank: Option<usize>,
    threshold: Option<f64>,
) -> Result<(), Error> {
    if let Some(name) = method {
        config.method.name = name.parse::<MethodName>()?;
        // A method switch resets stale selection fields from the file.
        config.method.rank = None;
        config.method.threshold = None;
    }
    if rank.is_some() {
        config.method.rank = rank;
        config.method.threshold = None;
    }
    if threshold.is_some() {
        config.method.threshold = threshold;
        config.method.rank = None;
    }
    config.method.selection().map(|_| ())
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Init { config, force } => {
            if config.exists() && !force {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    format!("{} exists; pass --force to overwrite", config.display()),
                )));
            }
            fs::write(&config, CONFIG_TEMPLATE)?;
            println!("wrote {}", config.display());
            Ok(())
        }
        Command::Simulate { common } => {
            let config = load(&common)?;
            let artifacts = harness::cmd_simulate(&config)?;
            println!("simulate -> {}", artifacts.dir.display());
            Ok(())
        }
        Command::Retrieve {
            common,
            method,
            rank,
            threshold,
        } => {
            let mut config = load(&common)?;
            apply_method_overrides(&mut config, method, rank, threshold)?;
            let artifacts = harness::cmd_retrieve(&config)?;
            println!(
                "retrieve ({}{}) -> {}",
                artifacts.run.method.as_str(),
                artifacts
                    .run
                    .rank
                    .map(|r| format!(", rank {r}"))
                    .unwrap_or_default(),
                artifacts.dir.display()
            );
            if !artifacts.laplace_converged {
                eprintln!("warning: MAP solver did not converge; see manifest.txt");
            }
            Ok(())
        }
        Command::Compare { common } => {
            let config = load(&common)?;
            let artifacts = harness::cmd_compare(&config)?;
            println!(
                "compare ({} rows) -> {}",
                artifacts.points.len(),
                artifacts.dir.display()
            );
            Ok(())
        }
        Command::Report { out } => {
            let text = harness::cmd_report(&out)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Parse { .. } => 2,
        Error::Io(_) => 4,
        Error::DimensionMismatch { .. }
        | Error::NonFinite { .. }
        | Error::NonFiniteAt { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::SingularFactor { .. }
        | Error::Infeasible(_) => 3,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
