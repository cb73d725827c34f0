mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use helmfosls::RunConfig;

use crate::experiments::Experiment;

#[derive(Parser, Debug)]
#[command(name = "helmfosls", version, about = "Pollution-free least-squares Helmholtz experiments")]
struct Args {
    experiment: ExperimentArg,
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides `out` in the configuration)
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed for randomized starts (overrides `seed` in the configuration)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentArg {
    Pollution,
    Condition,
    Solve,
    Adaptive,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Pollution => Experiment::Pollution,
            ExperimentArg::Condition => Experiment::Condition,
            ExperimentArg::Solve => Experiment::Solve,
            ExperimentArg::Adaptive => Experiment::Adaptive,
        }
    }
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let (mut cfg, warnings) = RunConfig::from_toml(&text)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = None;
    let files = experiments::run_experiment(args.experiment.into(), &cfg, &out, &warnings)?;
    for f in files {
        println!("{}", out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
