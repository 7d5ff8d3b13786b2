//! `brwlab` — configuration-driven experiment runner for the branching
//! random walk laboratory.
//!
//! Exit codes: 0 checks passed, 1 a check failed, 2 config error,
//! 3 runtime error.

mod config;
mod experiments;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "brwlab", version, about = "branching random walk laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one experiment config and writes CSV tables, SVG plots, and a
    /// run manifest.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: config, then BRWLAB_THREADS, then all
        /// cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (a per-run subdirectory is created inside).
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Aggregates manifests under a directory into a pass/fail table.
    Summarize {
        /// Directory with run outputs.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(3)
        }
    }
}

fn real_main() -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => run_command(&config, seed, threads, &out),
        Command::Summarize { dir } => {
            let rows = report::summarize(&dir)?;
            let (text, all_pass) = report::render_summary(&rows);
            print!("{text}");
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn run_command(
    config_path: &PathBuf,
    seed_override: Option<u64>,
    threads_override: Option<usize>,
    out: &PathBuf,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let body = match std::fs::read_to_string(config_path) {
        Ok(body) => body,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", config_path.display());
            return Ok(ExitCode::from(2));
        }
    };
    let mut config = match ExperimentConfig::from_json(&body) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    if let Some(seed) = seed_override {
        config.seed = seed;
    }

    let threads = threads_override
        .or(config.threads)
        .or_else(|| {
            std::env::var("BRWLAB_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;

    let hash = config.hash();
    let started = Instant::now();
    let output = pool.install(|| experiments::run(&config))?;
    let wall = started.elapsed().as_secs_f64();

    let dir = out.join(format!("{}-{}", config.kind_name(), &hash[..8]));
    report::persist(
        &dir,
        config.kind_name(),
        config.seed,
        &hash,
        serde_json::to_value(&config)?,
        wall,
        &output,
    )?;

    let mut all_pass = true;
    for check in &output.checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} (statistic {:.6}, threshold {:.6})",
            check.name, check.statistic, check.threshold
        );
        all_pass &= check.pass;
    }
    println!("wrote {}", dir.display());
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
