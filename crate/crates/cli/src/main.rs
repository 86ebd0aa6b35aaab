mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "dps",
    version,
    about = "Adapt and evaluate deep perceptual similarity metrics"
)]
struct Cli {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config field, e.g. `--set train.epochs=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Replace the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run sweep cells one at a time.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write distinct random distortion orderings.
    GenOrderings {
        #[arg(long)]
        count: Option<usize>,
        /// Output directory (default: `<output>/orderings`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adapt scalars for every (network, method, ordering, repeat) cell.
    Train,
    /// Score baseline and adapted metrics into report files.
    Eval {
        /// Skip adapted checkpoints.
        #[arg(long)]
        baseline_only: bool,
    },
    /// Aggregate report files into summary CSV tables.
    Report {
        /// Directory of `*.jsonl` reports (default: `<output>/reports`).
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Output directory (default: `<output>/summary`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check exported weights against their reference activation fixture.
    VerifyWeights {
        #[arg(long, requires = "weights")]
        fixture: Option<PathBuf>,
        #[arg(long, requires = "fixture")]
        weights: Option<PathBuf>,
        /// Network spec file; else the built-in `--arch`.
        #[arg(long, conflicts_with = "arch")]
        spec: Option<PathBuf>,
        #[arg(long)]
        arch: Option<String>,
        /// Absolute tolerance; else the fixture's own, else 1e-4.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let threads = if cli.deterministic { 1 } else { cli.jobs.unwrap_or(0) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::GenOrderings { count, out } => commands::orderings::run(&cfg, count, out),
        Command::Train => commands::train::run(&cfg),
        Command::Eval { baseline_only } => commands::eval::run(&cfg, baseline_only),
        Command::Report { reports, out } => commands::report::run(&cfg, reports, out),
        Command::VerifyWeights {
            fixture,
            weights,
            spec,
            arch,
            tolerance,
        } => commands::verify::run(&cfg, fixture, weights, spec, arch, tolerance),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            log::error!("{n} sweep cell(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
