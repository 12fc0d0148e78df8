//! `skld`: runs experiments described by JSON configs and writes CSV/JSON
//! artifacts stamped with the config hash and toolkit version.

mod config;
mod error;
mod experiments;
mod output;
mod plots;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig, VerifyParams};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "skld",
    version,
    about = "Spectral-Galerkin experiments for stochastic wave and heat equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run the invariant suite on the default configuration.
    Verify {
        /// Where to write verify.json and verify.csv.
        #[arg(long, default_value = "skld-verify")]
        out: PathBuf,
    },
    /// Write gnuplot data files for the result series in a directory.
    EmitPlots { dir: PathBuf },
}

/// Caps the rayon pool when SKLD_THREADS is set.
fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SKLD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::field(
            "SKLD_THREADS",
            format!("must be a positive integer, got {raw:?}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn execute(config: &ExperimentConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let outcome = experiments::run(config)?;
    let written = outcome.artifacts.write_all(&config.output.dir)?;
    let (key, value) = outcome.metric;
    println!(
        "{} {key}={value} files={} wall={:.2}s",
        config.experiment.name(),
        written.len(),
        start.elapsed().as_secs_f64()
    );
    outcome.failure.map_or(Ok(()), Err)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
            execute(&ExperimentConfig::from_json(&text)?)
        }
        Command::Verify { out } => {
            let mut cfg =
                ExperimentConfig::default_with(Experiment::Verify(VerifyParams::default()));
            cfg.output.dir = out;
            execute(&cfg)
        }
        Command::EmitPlots { dir } => {
            let written = plots::emit(&dir)?;
            println!("emit-plots files={}", written.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
