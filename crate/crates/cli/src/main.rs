//! `mvlab` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mvlab::config::{ExperimentConfig, Kind};
use mvlab::runner::run_experiment;

/// Exit status when the run finished but its acceptance predicate failed.
const EXIT_FAILED: u8 = 1;
/// Exit status for invalid input or a run error.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "mvlab", version, about = "Mean-field SPDE simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, env = "MVLAB_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Master seed; overrides the config value.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Check a config and print it with all defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in oracle suite.
    Selftest {
        #[arg(long, env = "MVLAB_OUT_DIR", default_value = "out/selftest")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::read(path)?;
    Ok(cfg.normalized()?)
}

fn run(cfg: ExperimentConfig, out: PathBuf, workers: usize) -> Result<bool> {
    let bundle = run_experiment(&cfg, &out, workers)?;
    for f in &bundle.files {
        println!("wrote {}", out.join(f).display());
    }
    println!("summary {}", bundle.summary);
    println!("{}", if bundle.pass { "PASS" } else { "FAIL" });
    Ok(bundle.pass)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = load(&config).with_context(|| format!("invalid config {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            run(cfg, out, workers)
        }
        Command::Validate { config } => {
            let cfg = load(&config).with_context(|| format!("invalid config {}", config.display()))?;
            print!("{}", cfg.to_toml_string());
            Ok(true)
        }
        Command::Selftest { out, seed, workers } => {
            let mut cfg = ExperimentConfig::new(Kind::Selftest);
            cfg.seed = seed;
            run(cfg, out, workers)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
