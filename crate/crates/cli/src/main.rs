//! `metasplit` command line: runs one experiment and writes CSV, metadata
//! and an SVG chart.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures (singular ERM system, loss of positive definiteness), 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use metasplit::harness::{self, ExperimentConfig, ExperimentKind};
use metasplit::Error;

#[derive(Parser, Debug)]
#[command(
    name = "metasplit",
    version,
    about = "Split vs non-split meta-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal asymptotic rates of both methods against d/n
    FigA(RunArgs),
    /// Estimation error against the number of tasks
    FigB(RunArgs),
    /// Scaled estimation error against d/n
    FigC(RunArgs),
    /// One-dimensional counterexample for the non-split method
    Counterexample(RunArgs),
    /// Finite and limiting rates at a single lambda
    Rates(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat TOML config; missing keys take the experiment defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed (required for fig-a, fig-b and fig-c)
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores)
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Skip the SVG chart
    #[arg(long)]
    no_chart: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::FigA(a) => (ExperimentKind::FigA, a),
            Command::FigB(a) => (ExperimentKind::FigB, a),
            Command::FigC(a) => (ExperimentKind::FigC, a),
            Command::Counterexample(a) => (ExperimentKind::Counterexample, a),
            Command::Rates(a) => (ExperimentKind::Rates, a),
        }
    }
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path, Some(kind)).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::Config(format!("cannot read {}: {source}", path.display()))
            }
            other => other,
        })?,
        None => ExperimentConfig::defaults(kind),
    };
    match args.seed {
        Some(seed) => cfg.seed = seed,
        None if kind.is_figure() => {
            return Err(Error::Config(format!("--seed is required for {kind}")))
        }
        None => {}
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, args) = cli.command.split();
    let cfg = resolve(kind, &args)?;
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be >= 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let rows = harness::run(&cfg)?;
    let paths = harness::write_outputs(&cfg, &rows, !args.no_chart)?;
    println!("{}: {} rows", cfg.experiment, rows.len());
    println!("csv      {}", paths.csv.display());
    if let Some(chart) = &paths.chart {
        println!("chart    {}", chart.display());
    }
    println!("metadata {}", paths.metadata.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        Some(Error::Config(_)) | Some(Error::InvalidArgument(_)) | Some(Error::InvalidSplit(_)) => {
            2
        }
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
