//! `bpm`: batch front-end for robust pulse optimisation and XY-8
//! magnetometry runs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bpm_core::optimizer::Method;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::output::OutDir;

#[derive(Parser, Debug)]
#[command(
    name = "bpm",
    version,
    about = "Surrogate-assisted robust pulse optimisation and XY-8 magnetometry"
)]
struct Cli {
    /// JSON run configuration; the shipped defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bit-stable output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "BPM_OUT_DIR", default_value = "bpm-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    /// B-PM, PM, B-SFB or SFB.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Number of parameter sets N_D.
    #[arg(long)]
    nd: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct TrialCount {
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One optimisation run plus the optimised field's fidelity map.
    Optimize(MethodArgs),
    /// Independent seeded runs and their statistics.
    Trials {
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        count: TrialCount,
    },
    /// Truth, sample and prediction maps and the cost/deviation tables.
    SurrogateDemo,
    /// Ramsey traces and T2 for rectangular and shaped XY-8 pulses.
    Magnetometry,
    /// Trials for every configured (method, N_D) pair.
    Compare(TrialCount),
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: bpm_core::Error| e.to_string())
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn prepare(cli: &Cli) -> Result<RunConfig, anyhow::Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let apply_method = |config: &mut RunConfig, m: &MethodArgs| {
        if let Some(method) = m.method {
            config.optimizer.method = method;
        }
        if let Some(nd) = m.nd {
            config.optimizer.n_d = nd;
        }
    };
    let apply_count = |config: &mut RunConfig, c: &TrialCount| -> anyhow::Result<()> {
        if let Some(t) = c.trials {
            anyhow::ensure!(t > 0, "--trials must be at least 1");
            config.optimizer.trials = t;
        }
        Ok(())
    };
    match &cli.command {
        Command::Optimize(m) => apply_method(&mut config, m),
        Command::Trials { method, count } => {
            apply_method(&mut config, method);
            apply_count(&mut config, count)?;
        }
        Command::Compare(count) => apply_count(&mut config, count)?,
        Command::SurrogateDemo | Command::Magnetometry => {}
    }
    config.check()?;
    if let Some(threads) = cli.threads {
        anyhow::ensure!(threads > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = prepare(cli).map_err(Failure::Usage)?;
    let out = OutDir::create(&cli.out).map_err(Failure::Runtime)?;
    out.json("config.json", &config).map_err(Failure::Runtime)?;
    match &cli.command {
        Command::Optimize(_) => commands::optimize_cmd(&config, &out),
        Command::Trials { .. } => commands::trials_cmd(&config, &out),
        Command::SurrogateDemo => commands::surrogate_demo_cmd(&config, &out),
        Command::Magnetometry => commands::magnetometry_cmd(&config, &out),
        Command::Compare(_) => commands::compare_cmd(&config, &out),
    }
    .map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
