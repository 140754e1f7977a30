use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdalab_cli::{read_config, run_to_dir, CliError, ConfigError, ExperimentKind, RunOptions};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gdalab", version, about = "Two-timescale gradient descent-ascent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Least real part of the generator over an eta grid
    Spectrum(RunArgs),
    /// Integrate the quadratic GDA flow and fit decay rates
    Simulate(RunArgs),
    /// Hypocoercivity constants per eta
    Hypo(RunArgs),
    /// Preconditioned iteration and its eta-uniformity
    Precond(RunArgs),
    /// Interacting particle simulation, optionally against the grid MNE
    Meanfield(RunArgs),
    /// Reflection-coupling contraction runs
    Coupling(RunArgs),
    /// Concave distance function and rate constant for a convexity profile
    Rates(RunArgs),
    /// Averaged contraction rate and its validation over gamma
    Averaging(RunArgs),
    /// Check a configuration without running it
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `out/<kind>`
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), CliError> {
    let cfg = read_config(&args.config, Some(kind))?;
    if cfg.kind != kind {
        return Err(ConfigError::Schema {
            path: "kind".into(),
            message: format!("config is `{}` but the subcommand runs `{kind}`", cfg.kind),
        }
        .into());
    }
    if args.threads == Some(0) {
        return Err(ConfigError::Schema {
            path: "--threads".into(),
            message: "must be at least 1".into(),
        }
        .into());
    }
    let dir = args
        .out
        .or_else(|| cfg.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let opts = RunOptions {
        seed: args.seed,
        threads: args.threads,
    };
    let (_, files) = run_to_dir(&cfg, &opts, &dir)?;
    let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    println!("{}", json!({"status": "ok", "kind": kind.name(), "out": dir.display().to_string(), "files": files}));
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let cfg = read_config(&args.config, None)?;
    println!("{}", json!({"status": "ok", "kind": cfg.kind.name()}));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => run(ExperimentKind::SpectrumSweep, a),
        Command::Simulate(a) => run(ExperimentKind::QuadraticSim, a),
        Command::Hypo(a) => run(ExperimentKind::HypocoercivityReport, a),
        Command::Precond(a) => run(ExperimentKind::PreconditionSweep, a),
        Command::Meanfield(a) => run(ExperimentKind::MeanfieldRun, a),
        Command::Coupling(a) => run(ExperimentKind::CouplingRun, a),
        Command::Rates(a) => run(ExperimentKind::RatesReport, a),
        Command::Averaging(a) => run(ExperimentKind::AveragingRun, a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
