//! `hawkes-impact <experiment> --config <file> [--seed N] [--out DIR]`
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

mod config;
mod error;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "hawkes-impact", version, about = "Run a hawkes-impact experiment from a JSON config")]
struct Args {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out`, then `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> CliResult<(PathBuf, bool)> {
    let config = ExperimentConfig::load(&args.config)?.resolve(args.experiment, args.seed)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(args.experiment.to_string()));
    let report = experiments::run(&config)?;
    report.write(&out, &config)?;
    for (name, passed) in report.checks() {
        eprintln!("{:<44} {}", name, if *passed { "pass" } else { "FAIL" });
    }
    Ok((out, report.all_pass()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok((out, all_pass)) => {
            let status = if all_pass { "all checks pass" } else { "some checks fail" };
            println!("{}: {status}; wrote {}", args.experiment, out.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hawkes-impact: {e}");
            e.exit_code()
        }
    }
}
