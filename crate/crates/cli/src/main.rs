//! `mobwds` command-line front end.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mobwds::predict::{BoundRule, PredictMode};
use mobwds::Params;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mobwds", version, about = "Bivariate Weibull competing-risks modelling")]
struct Cli {
    /// Directory receiving the outputs and the run manifest
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; all cores when unset
    #[arg(long, global = true, env = "MOBWDS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximum likelihood fit with Wald intervals, written to fit.json
    Fit(FitArgs),
    /// Metropolis-Hastings posterior sampling: chain.csv, acf.csv, summary.json
    Bayes(BayesArgs),
    /// Predict failures among censored units: predict.json, pmf.csv
    Predict(PredictArgs),
    /// Monte Carlo study from a JSON config: table.csv, study.json
    Simulate(SimulateArgs),
    /// Simulate a dataset: data.csv
    Sample(SampleArgs),
    /// Kaplan-Meier estimate: km.csv, optionally overlay.csv
    Km(KmArgs),
    /// Mean time to failure: mttf.json
    Mttf(MttfArgs),
    /// Joint density on a grid: grid.csv
    DensityGrid(DensityGridArgs),
}

fn parse_theta(s: &str) -> Result<Params, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 4] = parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected alpha0,alpha1,alpha2,lambda, got {} values", v.len()))?;
    Params::from_array(arr).map_err(|e| e.to_string())
}

fn parse_sigma(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts.len() {
        1 => Ok([parts[0]; 4]),
        4 => Ok([parts[0], parts[1], parts[2], parts[3]]),
        n => Err(format!("expected 1 or 4 values, got {n}")),
    }
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// CSV with columns time,cause
    data: PathBuf,
    /// Times are divided by this before fitting
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Optimizer start alpha0,alpha1,alpha2,lambda (on the scaled time axis)
    #[arg(long, value_parser = parse_theta)]
    init: Option<Params>,
}

#[derive(Debug, Args, Serialize)]
struct BayesArgs {
    data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Total iterations per chain, burn-in included
    #[arg(long, default_value_t = 15_500)]
    chain_length: usize,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    /// Number of chains; the first starts at --init, the others are scaled copies
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Chain start; the MLE when unset
    #[arg(long, value_parser = parse_theta)]
    init: Option<Params>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Proposal standard deviations, one value or four
    #[arg(long, value_parser = parse_sigma)]
    sigma: Option<[f64; 4]>,
    #[arg(long, default_value_t = 0.005)]
    a: f64,
    #[arg(long, default_value_t = 0.005)]
    b: f64,
    #[arg(long, default_value_t = 1.2)]
    a0: f64,
    #[arg(long, default_value_t = 1.2)]
    a1: f64,
    #[arg(long, default_value_t = 1.2)]
    a2: f64,
    #[arg(long, default_value_t = 0.005)]
    c1: f64,
    #[arg(long, default_value_t = 0.005)]
    c2: f64,
    /// Largest lag written to acf.csv
    #[arg(long, default_value_t = 50)]
    max_lag: usize,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    /// fit.json (plug-in prediction) or chain.csv (posterior predictive)
    source: PathBuf,
    /// Common censoring time, in data units
    #[arg(long = "R")]
    r: f64,
    #[arg(long)]
    delta: f64,
    /// Number of units censored at R
    #[arg(long)]
    nstar: u64,
    /// any, 1, 2 or tie
    #[arg(long, default_value = "any")]
    mode: PredictMode,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// one-sided or equal-tail
    #[arg(long, default_value = "one-sided")]
    bound_rule: BoundRule,
    /// Overrides the time scale recorded next to the source
    #[arg(long)]
    time_scale: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    #[arg(long, value_parser = parse_theta)]
    theta: Params,
    #[arg(long)]
    n: usize,
    /// Target censored fraction
    #[arg(long, conflicts_with = "censor_time")]
    censor_rate: Option<f64>,
    /// Fixed type-I censoring time
    #[arg(long)]
    censor_time: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct KmArgs {
    data: PathBuf,
    /// fit.json or summary.json whose S_T(t) is tabulated next to the estimate
    #[arg(long)]
    overlay: Vec<PathBuf>,
    /// Number of grid intervals in overlay.csv
    #[arg(long, default_value_t = 200)]
    steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct MttfArgs {
    /// fit.json (plug-in) or chain.csv (posterior mean)
    source: PathBuf,
    #[arg(long)]
    time_scale: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct DensityGridArgs {
    #[arg(long, value_parser = parse_theta)]
    theta: Params,
    #[arg(long)]
    xmax: f64,
    #[arg(long)]
    ymax: f64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = cli.out;
    match cli.command {
        Command::Fit(a) => commands::fit(&out, &a),
        Command::Bayes(a) => commands::bayes(&out, &a),
        Command::Predict(a) => commands::predict(&out, &a),
        Command::Simulate(a) => commands::simulate(&out, &a),
        Command::Sample(a) => commands::sample(&out, &a),
        Command::Km(a) => commands::km(&out, &a),
        Command::Mttf(a) => commands::mttf(&out, &a),
        Command::DensityGrid(a) => commands::density_grid(&out, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mobwds: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
