use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use mobwds::bayes::{
    autocorrelation, dispersed_starts, gelman_rubin, posterior_mttf, posterior_summary, read_chain_csv,
    run_chains, write_chain_csv, ChainSettings, Hyperparams, Posterior, PosteriorSample, ProposalSpec,
};
use mobwds::dataio::Summary;
use mobwds::model::{min_survival, mttf as plugin_mttf, PARAM_NAMES};
use mobwds::numfmt::fmt_sig;
use mobwds::predict::{predict_bayesian, predict_plugin, PredictionQuery};
use mobwds::sampling::{derive_seed, generate_dataset, CensorSpec, SeededRng};
use mobwds::simstudy::{run_study, StudyConfig};
use mobwds::{kaplan_meier, parse_csv, Dataset, FitOptions, FitResult, Interval, Mobwds, Params, QuadratureSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::{BayesArgs, DensityGridArgs, FitArgs, KmArgs, MttfArgs, PredictArgs, SampleArgs, SimulateArgs};

pub const FIT_KIND: &str = "fit";
pub const SUMMARY_KIND: &str = "bayes_summary";

#[derive(Debug, Serialize, Deserialize)]
pub struct FitFile {
    pub kind: String,
    /// Data times were divided by this before fitting.
    pub time_scale: f64,
    pub data: Summary,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BayesSettingsOut {
    pub hyper: Hyperparams,
    pub proposal: ProposalSpec,
    pub chain_length: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub chain_seeds: Vec<u64>,
    pub starts: Vec<Params>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BayesSummaryFile {
    pub kind: String,
    pub time_scale: f64,
    pub data: Summary,
    /// Posterior means of the first chain.
    pub theta_hat: Params,
    pub variance: [f64; 4],
    pub level: f64,
    pub intervals: [Interval; 4],
    pub draws: usize,
    pub acceptance_rate: f64,
    pub chain_acceptance_rates: Vec<f64>,
    pub rhat: Option<[f64; 4]>,
    pub settings: BayesSettingsOut,
}

enum Source {
    Fit(FitFile),
    Summary(BayesSummaryFile),
    Chain { sample: PosteriorSample, time_scale: Option<f64> },
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn check_scale(scale: f64) -> CliResult<f64> {
    if scale.is_finite() && scale > 0.0 {
        Ok(scale)
    } else {
        Err(CliError::Usage(format!("time scale must be positive, got {scale}")))
    }
}

fn load_dataset(run: &mut Run, path: &Path, scale: f64) -> CliResult<Dataset> {
    run.input(path)?;
    let data = parse_csv(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(data.rescaled(check_scale(scale)?)?)
}

fn load_source(run: &mut Run, path: &Path) -> CliResult<Source> {
    run.input(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        let sample = read_chain_csv(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let sibling = path.with_file_name("summary.json");
        let time_scale = match fs::read_to_string(&sibling) {
            Ok(text) => serde_json::from_str::<BayesSummaryFile>(&text).ok().map(|s| s.time_scale),
            Err(_) => None,
        };
        return Ok(Source::Chain { sample, time_scale });
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::Data(format!("{}: {e}", path.display()));
    match value.get("kind").and_then(|k| k.as_str()) {
        Some(FIT_KIND) => Ok(Source::Fit(serde_json::from_value(value).map_err(bad)?)),
        Some(SUMMARY_KIND) => Ok(Source::Summary(serde_json::from_value(value).map_err(bad)?)),
        _ => Err(CliError::Data(format!(
            "{}: not a fit.json or summary.json written by this tool",
            path.display()
        ))),
    }
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_sig(*v)).collect::<Vec<_>>().join(",")
}

pub fn fit(out: &Path, args: &FitArgs) -> CliResult<()> {
    let mut run = Run::start(out, "fit", args)?;
    let data = load_dataset(&mut run, &args.data, args.time_scale)?;
    let quad = QuadratureSpec::default();
    let opts = FitOptions {
        level: args.level,
        ..FitOptions::default()
    };
    let result = mobwds::fit_mle(&data, args.init, &opts, &quad)?;
    for note in &result.notes {
        eprintln!("mobwds: note: {note}");
    }
    let converged = result.converged;
    let file = FitFile {
        kind: FIT_KIND.to_string(),
        time_scale: args.time_scale,
        data: data.summary(),
        fit: result,
    };
    run.write_json("fit.json", &file)?;
    run.finish()?;
    if !converged {
        return Err(CliError::Numerical("convergence: optimizer stopped before converging, see fit.json".into()));
    }
    Ok(())
}

pub fn bayes(out: &Path, args: &BayesArgs) -> CliResult<()> {
    let mut run = Run::start(out, "bayes", args)?;
    let data = load_dataset(&mut run, &args.data, args.time_scale)?;
    if args.chains == 0 {
        return Err(CliError::Usage("--chains must be at least 1".into()));
    }
    let quad = QuadratureSpec::default();
    let hyper = Hyperparams {
        a: args.a,
        b: args.b,
        a0: args.a0,
        a1: args.a1,
        a2: args.a2,
        c1: args.c1,
        c2: args.c2,
    };
    hyper.validate()?;
    let proposal = args.sigma.map(|sigma| ProposalSpec { sigma }).unwrap_or_default();
    proposal.validate()?;
    let settings = ChainSettings {
        chain_length: args.chain_length,
        burn_in: args.burn_in,
    };
    let init = match args.init {
        Some(p) => p,
        None => mobwds::fit_mle(&data, None, &FitOptions::default(), &quad)?.theta_hat,
    };
    let starts = dispersed_starts(&init, args.chains);
    let chain_seeds: Vec<u64> = (0..args.chains).map(|i| derive_seed(args.seed, &[i as u64])).collect();
    for s in &chain_seeds {
        run.seed(*s);
    }
    let target = Posterior { data: &data, hyper, quad };
    let chains = run_chains(&target, &starts, settings, &proposal, args.seed)?;
    let first = &chains[0];
    let summary = posterior_summary(first, args.level)?;
    let rhat = if chains.len() >= 2 { Some(gelman_rubin(&chains)?) } else { None };

    for (i, chain) in chains.iter().enumerate() {
        let mut buf = Vec::new();
        write_chain_csv(chain, &mut buf)?;
        let name = if i == 0 { "chain.csv".to_string() } else { format!("chain_{}.csv", i + 1) };
        run.write(&name, &buf)?;
    }
    let max_lag = args.max_lag.min(first.len() - 1);
    let acf = autocorrelation(first, max_lag)?;
    let mut text = format!("lag,{}\n", PARAM_NAMES.join(","));
    for lag in 0..=max_lag {
        text.push_str(&format!("{lag},{}\n", csv_row(&[acf[0][lag], acf[1][lag], acf[2][lag], acf[3][lag]])));
    }
    run.write("acf.csv", text.as_bytes())?;

    let file = BayesSummaryFile {
        kind: SUMMARY_KIND.to_string(),
        time_scale: args.time_scale,
        data: data.summary(),
        theta_hat: Params::from_array(summary.mean)?,
        variance: summary.variance,
        level: summary.level,
        intervals: summary.intervals,
        draws: first.len(),
        acceptance_rate: first.acceptance_rate,
        chain_acceptance_rates: chains.iter().map(|c| c.acceptance_rate).collect(),
        rhat,
        settings: BayesSettingsOut {
            hyper,
            proposal,
            chain_length: args.chain_length,
            burn_in: args.burn_in,
            chains: args.chains,
            seed: args.seed,
            chain_seeds,
            starts,
        },
    };
    run.write_json("summary.json", &file)?;
    run.finish()
}

#[derive(Serialize)]
struct PredictFile<'a> {
    method: &'static str,
    time_scale: f64,
    /// Query on the data time axis.
    censor_time: f64,
    delta: f64,
    #[serde(flatten)]
    report: &'a mobwds::predict::PredictionReport,
}

pub fn predict(out: &Path, args: &PredictArgs) -> CliResult<()> {
    let mut run = Run::start(out, "predict", args)?;
    let source = load_source(&mut run, &args.source)?;
    let quad = QuadratureSpec::default();
    let (method, scale) = match &source {
        Source::Fit(f) => ("frequentist", args.time_scale.unwrap_or(f.time_scale)),
        Source::Chain { time_scale, .. } => ("bayesian", args.time_scale.or(*time_scale).unwrap_or(1.0)),
        Source::Summary(_) => {
            return Err(CliError::Usage(
                "predict needs fit.json or a chain CSV; pass chain.csv for the posterior predictive".into(),
            ))
        }
    };
    let scale = check_scale(scale)?;
    let query = PredictionQuery {
        censor_time: args.r / scale,
        delta: args.delta / scale,
        n_star: args.nstar,
        mode: args.mode,
        level: args.level,
        bound_rule: args.bound_rule,
    };
    let report = match &source {
        Source::Fit(f) => predict_plugin(&f.fit.theta_hat, &query, &quad)?,
        Source::Chain { sample, .. } => predict_bayesian(sample, &query, &quad)?,
        Source::Summary(_) => unreachable!("rejected above"),
    };
    let mut pmf = Vec::new();
    report.write_pmf_csv(&mut pmf)?;
    run.write_json(
        "predict.json",
        &PredictFile {
            method,
            time_scale: scale,
            censor_time: args.r,
            delta: args.delta,
            report: &report,
        },
    )?;
    run.write("pmf.csv", &pmf)?;
    run.finish()
}

#[derive(Serialize)]
struct StudyFile<'a> {
    config: &'a StudyConfig,
    replications: usize,
    exclusions: &'a [mobwds::simstudy::CellExclusions],
    failures: &'a [mobwds::simstudy::ReplicateFailure],
}

pub fn simulate(out: &Path, args: &SimulateArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let config: StudyConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let mut run = Run::start(out, "simulate", &config)?;
    run.input(&args.config)?;
    run.seed(config.master_seed);
    let report = run_study(&config)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    run.write("table.csv", &csv)?;
    run.write_json(
        "study.json",
        &StudyFile {
            config: &config,
            replications: config.replications(),
            exclusions: &report.exclusions,
            failures: &report.failures,
        },
    )?;
    run.extra(serde_json::json!({ "exclusions": report.exclusions }));
    run.finish()
}

pub fn sample(out: &Path, args: &SampleArgs) -> CliResult<()> {
    let mut run = Run::start(out, "sample", args)?;
    run.seed(args.seed);
    let censor = match (args.censor_rate, args.censor_time) {
        (Some(rate), _) => CensorSpec::TargetRate { rate },
        (None, Some(time)) => CensorSpec::FixedTime { time },
        (None, None) => CensorSpec::None,
    };
    censor.validate()?;
    let data = generate_dataset(&args.theta, args.n, censor, &mut SeededRng::new(args.seed))?;
    run.write("data.csv", data.to_csv_string().as_bytes())?;
    run.finish()
}

pub fn km(out: &Path, args: &KmArgs) -> CliResult<()> {
    let mut run = Run::start(out, "km", args)?;
    let data = load_dataset(&mut run, &args.data, 1.0)?;
    let curve = kaplan_meier(&data);
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    run.write("km.csv", &buf)?;
    if !args.overlay.is_empty() {
        if args.steps == 0 {
            return Err(CliError::Usage("--steps must be positive".into()));
        }
        let mut curves: Vec<(String, Params, f64)> = Vec::new();
        for path in &args.overlay {
            let (label, theta, scale) = match load_source(&mut run, path)? {
                Source::Fit(f) => ("frequentist", f.fit.theta_hat, f.time_scale),
                Source::Summary(s) => ("bayesian", s.theta_hat, s.time_scale),
                Source::Chain { .. } => {
                    return Err(CliError::Usage("--overlay takes fit.json or summary.json".into()))
                }
            };
            let taken = curves.iter().filter(|c| c.0.starts_with(label)).count();
            let label = if taken == 0 { label.to_string() } else { format!("{label}_{}", taken + 1) };
            curves.push((label, theta, check_scale(scale)?));
        }
        let t_max = data.records().iter().map(|r| r.time()).fold(0.0, f64::max);
        let mut text = format!(
            "t,km,{}\n",
            curves.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join(",")
        );
        for i in 0..=args.steps {
            let t = t_max * i as f64 / args.steps as f64;
            let mut row = vec![t, curve.eval(t)];
            for (_, theta, scale) in &curves {
                row.push(min_survival(t / scale, theta)?);
            }
            text.push_str(&csv_row(&row));
            text.push('\n');
        }
        run.write("overlay.csv", text.as_bytes())?;
    }
    run.finish()
}

#[derive(Serialize)]
struct MttfFile {
    method: &'static str,
    /// On the data time axis.
    mttf: f64,
    time_scale: f64,
    /// On the fitted (scaled) axis.
    mttf_scaled: f64,
    draws: Option<usize>,
}

pub fn mttf(out: &Path, args: &MttfArgs) -> CliResult<()> {
    let mut run = Run::start(out, "mttf", args)?;
    let quad = QuadratureSpec::default();
    let file = match load_source(&mut run, &args.source)? {
        Source::Fit(f) => {
            let scale = check_scale(args.time_scale.unwrap_or(f.time_scale))?;
            let m = plugin_mttf(&f.fit.theta_hat, &quad)?;
            MttfFile {
                method: "frequentist",
                mttf: m * scale,
                time_scale: scale,
                mttf_scaled: m,
                draws: None,
            }
        }
        Source::Chain { sample, time_scale } => {
            let scale = check_scale(args.time_scale.or(time_scale).unwrap_or(1.0))?;
            let m = posterior_mttf(&sample, &quad)?;
            MttfFile {
                method: "bayesian",
                mttf: m * scale,
                time_scale: scale,
                mttf_scaled: m,
                draws: Some(sample.len()),
            }
        }
        Source::Summary(_) => {
            return Err(CliError::Usage(
                "the posterior MTTF averages over draws; pass chain.csv instead of summary.json".into(),
            ))
        }
    };
    run.write_json("mttf.json", &file)?;
    run.finish()
}

pub fn density_grid(out: &Path, args: &DensityGridArgs) -> CliResult<()> {
    let mut run = Run::start(out, "density-grid", args)?;
    if !(args.xmax > 0.0 && args.ymax > 0.0 && args.steps > 0) {
        return Err(CliError::Usage("--xmax, --ymax and --steps must be positive".into()));
    }
    let model = Mobwds::new(args.theta, QuadratureSpec::default());
    let mut text = String::from("x,y,density,part\n");
    for i in 1..=args.steps {
        let x = args.xmax * i as f64 / args.steps as f64;
        for j in 1..=args.steps {
            let y = args.ymax * j as f64 / args.steps as f64;
            let part = if x == y { "singular" } else { "continuous" };
            let d = model.density(x, y)?;
            text.push_str(&format!("{},{},{},{part}\n", fmt_sig(x), fmt_sig(y), fmt_sig(d)));
        }
    }
    run.write("grid.csv", text.as_bytes())?;
    run.finish()
}
