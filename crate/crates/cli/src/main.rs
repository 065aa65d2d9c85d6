//! Command-line front end for the branching-dimension toolkit.
//!
//! ```text
//! branchdim run <config.json> --seed <u64> --out <dir> [--trials T] [--threads K]
//! branchdim validate <config.json>
//! branchdim report <dir>
//! ```
//!
//! Exit codes: 0 success, 1 config or IO error, 2 numeric guard tripped.
//! Given the same config and seed, `run` writes byte-identical artifacts.

mod config;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use runner::{Artifacts, RunError};

#[derive(Parser)]
#[command(
    name = "branchdim",
    version,
    about = "Colored branching processes: line counting, block selections, fractal dimension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV + JSON artifacts.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Master seed; every trial draws from a stream derived from it.
        #[arg(long)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the config's trial count, where the experiment has one.
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads for parallel trials (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config, printing all violations.
    Validate {
        /// Path to the JSON experiment config.
        config: PathBuf,
    },
    /// Print the summary JSON of a finished run.
    Report {
        /// Output directory of a previous `run`.
        dir: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERIC_GUARD: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            trials,
            threads,
        } => run_command(&config, seed, &out, trials, threads),
        Command::Validate { config } => validate_command(&config),
        Command::Report { dir } => report_command(&dir),
    }
}

/// Parse the file and apply the trial override, returning the effective
/// config plus the hash of the raw bytes.
fn load_config(path: &Path, trials: Option<u64>) -> Result<(ExperimentConfig, String), String> {
    let raw = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut config: ExperimentConfig = serde_json::from_slice(&raw)
        .map_err(|e| format!("parse error in {}: {e}", path.display()))?;
    if let Some(t) = trials {
        config.set_trials(t);
    }
    let hash = format!("{:x}", Sha256::digest(&raw));
    Ok((config, hash))
}

fn run_command(
    config_path: &Path,
    seed: u64,
    out: &Path,
    trials: Option<u64>,
    threads: Option<usize>,
) -> ExitCode {
    let (config, hash) = match load_config(config_path, trials) {
        Ok(loaded) => loaded,
        Err(message) => {
            eprintln!("{message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let experiment = match config::validate(&config) {
        Ok(exp) => exp,
        Err(violations) => {
            for v in &violations {
                eprintln!("violation: {v}");
            }
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("cannot configure {k} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let artifacts = match Artifacts::new(out, seed, &hash) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("cannot prepare {}: {e}", out.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = write_config_echo(out, &config) {
        eprintln!("cannot write config echo: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match runner::run(&experiment, &artifacts) {
        Ok(()) => {
            println!("wrote {}", out.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(RunError::Core(e)) if e.is_numeric_guard() => {
            eprintln!("numeric guard: {e}");
            ExitCode::from(EXIT_NUMERIC_GUARD)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

/// Echo the effective config (after overrides) next to the results.
fn write_config_echo(out: &Path, config: &ExperimentConfig) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    fs::write(out.join("config_echo.json"), text)
}

fn validate_command(config_path: &Path) -> ExitCode {
    let (config, _) = match load_config(config_path, None) {
        Ok(loaded) => loaded,
        Err(message) => {
            eprintln!("{message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match config::validate(&config) {
        Ok(_) => {
            println!("ok: valid {} config", config.kind());
            ExitCode::SUCCESS
        }
        Err(violations) => {
            for v in &violations {
                eprintln!("violation: {v}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn report_command(dir: &Path) -> ExitCode {
    let path = dir.join("summary.json");
    match fs::read_to_string(&path) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
