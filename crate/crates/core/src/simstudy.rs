//! Monte Carlo study of estimator bias, MSE, interval length and coverage
//! over a grid of sample sizes and censoring rates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{mh_sample, posterior_summary, ChainSettings, Hyperparams, Posterior, ProposalSpec};
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, FitOptions, Interval};
use crate::model::{Params, PARAM_NAMES};
use crate::numfmt::fmt_sig;
use crate::quadrature::QuadratureSpec;
use crate::sampling::{derive_seed, generate_dataset, CensorSpec, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesStudySettings {
    #[serde(default)]
    pub hyper: Hyperparams,
    #[serde(default = "default_study_chain")]
    pub chain_length: usize,
    #[serde(default = "default_study_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub proposal: ProposalSpec,
}

fn default_study_chain() -> usize {
    5_500
}

fn default_study_burn_in() -> usize {
    500
}

impl Default for BayesStudySettings {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            chain_length: default_study_chain(),
            burn_in: default_study_burn_in(),
            proposal: ProposalSpec::default(),
        }
    }
}

/// Where each replicate's optimizer starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyInit {
    /// Moment-style start computed from the data.
    #[default]
    DataDriven,
    /// The true parameter.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub true_theta: Params,
    pub sample_sizes: Vec<usize>,
    pub censor_rates: Vec<f64>,
    /// Replicates per cell; defaults to 1000, or 200 when `bayes` is set.
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub bayes: Option<BayesStudySettings>,
    #[serde(default)]
    pub init: StudyInit,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

fn default_level() -> f64 {
    0.95
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            true_theta: Params::new(1.63, 1.11, 1.92, 2.35).expect("valid"),
            sample_sizes: vec![100, 200, 400],
            censor_rates: vec![0.0, 0.2, 0.4],
            replications: None,
            level: default_level(),
            master_seed: 0,
            bayes: None,
            init: StudyInit::default(),
            fit: FitOptions::default(),
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl StudyConfig {
    pub fn replications(&self) -> usize {
        self.replications
            .unwrap_or(if self.bayes.is_some() { 200 } else { 1000 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications() == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be a non-empty list of positive integers".into()));
        }
        if self.censor_rates.is_empty() {
            return Err(Error::Config("censor_rates must not be empty".into()));
        }
        for rate in &self.censor_rates {
            CensorSpec::TargetRate { rate: *rate }.validate()?;
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let Some(b) = &self.bayes {
            b.hyper.validate()?;
            b.proposal.validate()?;
            if b.chain_length <= b.burn_in {
                return Err(Error::Config("chain_length must exceed burn_in".into()));
            }
        }
        self.quadrature.validate()
    }

    /// `(n, censor rate)` in row-major order.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.sample_sizes
            .iter()
            .flat_map(|&n| self.censor_rates.iter().map(move |&r| (n, r)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frequentist,
    Bayesian,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Frequentist => "frequentist",
            Method::Bayesian => "bayesian",
        }
    }
}

/// Aggregates for one parameter, method and cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub censor_rate: f64,
    pub parameter: String,
    pub method: Method,
    pub relative_mse: f64,
    pub relative_bias: f64,
    pub avg_length: f64,
    pub coverage: f64,
    /// Replicates that entered the aggregates.
    pub used: usize,
    /// Standard errors of the four aggregates.
    pub relative_mse_se: f64,
    pub relative_bias_se: f64,
    pub avg_length_se: f64,
    pub coverage_se: f64,
    /// Realized fraction of censored units, averaged over used replicates.
    pub realized_censoring: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellExclusions {
    pub n: usize,
    pub censor_rate: f64,
    pub method: Method,
    pub attempted: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub n: usize,
    pub censor_rate: f64,
    pub replicate: usize,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub exclusions: Vec<CellExclusions>,
    pub failures: Vec<ReplicateFailure>,
}

impl StudyReport {
    pub const CSV_HEADER: &'static str = "n,censor_rate,parameter,method,relative_mse,relative_bias,avg_length,coverage,used,relative_mse_se,relative_bias_se,avg_length_se,coverage_se,realized_censoring";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt_sig(r.censor_rate),
                r.parameter,
                r.method.label(),
                fmt_sig(r.relative_mse),
                fmt_sig(r.relative_bias),
                fmt_sig(r.avg_length),
                fmt_sig(r.coverage),
                r.used,
                fmt_sig(r.relative_mse_se),
                fmt_sig(r.relative_bias_se),
                fmt_sig(r.avg_length_se),
                fmt_sig(r.coverage_se),
                fmt_sig(r.realized_censoring),
            )?;
        }
        Ok(())
    }

    pub fn row(&self, n: usize, censor_rate: f64, parameter: &str, method: Method) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.censor_rate == censor_rate && r.parameter == parameter && r.method == method)
    }
}

#[derive(Debug, Clone)]
struct Estimate {
    theta: [f64; 4],
    intervals: [Interval; 4],
}

struct Replicate {
    censored_fraction: f64,
    frequentist: std::result::Result<Estimate, String>,
    bayesian: Option<std::result::Result<Estimate, String>>,
}

fn run_replicate(config: &StudyConfig, cell: usize, n: usize, rate: f64, r: usize) -> Replicate {
    let seed = derive_seed(config.master_seed, &[cell as u64, r as u64]);
    let mut rng = SeededRng::new(seed);
    let data = match generate_dataset(&config.true_theta, n, CensorSpec::TargetRate { rate }, &mut rng) {
        Ok(d) => d,
        Err(e) => {
            return Replicate {
                censored_fraction: f64::NAN,
                frequentist: Err(e.to_string()),
                bayesian: config.bayes.map(|_| Err(e.to_string())),
            }
        }
    };
    let censored_fraction = data.summary().n_censored as f64 / n as f64;
    let opts = FitOptions {
        level: config.level,
        ..config.fit
    };
    let init = match config.init {
        StudyInit::Truth => Some(config.true_theta),
        StudyInit::DataDriven => None,
    };
    let fit = fit_mle(&data, init, &opts, &config.quadrature);
    let frequentist = match &fit {
        Err(e) => Err(e.to_string()),
        Ok(f) if !f.converged => Err("optimizer did not converge".to_string()),
        Ok(f) => match f.intervals {
            Some(iv) => Ok(Estimate {
                theta: f.theta_hat.to_array(),
                intervals: iv,
            }),
            None => Err(format!("no Wald intervals: {}", f.notes.join("; "))),
        },
    };
    let bayesian = config.bayes.map(|b| {
        let start = match &fit {
            Ok(f) => f.theta_hat,
            Err(_) => config.true_theta,
        };
        let target = Posterior {
            data: &data,
            hyper: b.hyper,
            quad: config.quadrature,
        };
        let settings = ChainSettings {
            chain_length: b.chain_length,
            burn_in: b.burn_in,
        };
        mh_sample(&target, start, settings, &b.proposal, &mut rng)
            .and_then(|s| posterior_summary(&s, config.level))
            .map(|s| Estimate {
                theta: s.mean,
                intervals: s.intervals,
            })
            .map_err(|e| e.to_string())
    });
    Replicate {
        censored_fraction,
        frequentist,
        bayesian,
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn aggregate(
    n: usize,
    rate: f64,
    method: Method,
    truth: &[f64; 4],
    used: &[(&Estimate, f64)],
) -> Vec<StudyRow> {
    let realized = used.iter().map(|(_, c)| c).sum::<f64>() / used.len() as f64;
    (0..4)
        .map(|k| {
            let t = truth[k];
            let bias: Vec<f64> = used.iter().map(|(e, _)| (e.theta[k] - t) / t).collect();
            let sq: Vec<f64> = bias.iter().map(|b| b * b).collect();
            let len: Vec<f64> = used.iter().map(|(e, _)| e.intervals[k].width()).collect();
            let hit: Vec<f64> = used
                .iter()
                .map(|(e, _)| if e.intervals[k].contains(t) { 1.0 } else { 0.0 })
                .collect();
            let (relative_bias, relative_bias_se) = mean_se(&bias);
            let (relative_mse, relative_mse_se) = mean_se(&sq);
            let (avg_length, avg_length_se) = mean_se(&len);
            let (coverage, coverage_se) = mean_se(&hit);
            StudyRow {
                n,
                censor_rate: rate,
                parameter: PARAM_NAMES[k].to_string(),
                method,
                relative_mse,
                relative_bias,
                avg_length,
                coverage,
                used: used.len(),
                relative_mse_se,
                relative_bias_se,
                avg_length_se,
                coverage_se,
                realized_censoring: realized,
            }
        })
        .collect()
}

/// Runs every cell. Replicate `r` of cell `c` draws from
/// `derive_seed(master_seed, [c, r])`, so results do not depend on the
/// thread count.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let reps = config.replications();
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    let results: Vec<Replicate> = jobs
        .par_iter()
        .map(|&(c, r)| run_replicate(config, c, cells[c].0, cells[c].1, r))
        .collect();

    let truth = config.true_theta.to_array();
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    let mut failures = Vec::new();
    for (c, &(n, rate)) in cells.iter().enumerate() {
        let chunk = &results[c * reps..(c + 1) * reps];
        let mut methods = vec![Method::Frequentist];
        if config.bayes.is_some() {
            methods.push(Method::Bayesian);
        }
        for method in methods {
            let mut used = Vec::new();
            for (r, rep) in chunk.iter().enumerate() {
                let outcome = match method {
                    Method::Frequentist => &rep.frequentist,
                    Method::Bayesian => rep.bayesian.as_ref().expect("bayes configured"),
                };
                match outcome {
                    Ok(e) => used.push((e, rep.censored_fraction)),
                    Err(reason) => failures.push(ReplicateFailure {
                        n,
                        censor_rate: rate,
                        replicate: r,
                        method,
                        reason: reason.clone(),
                    }),
                }
            }
            exclusions.push(CellExclusions {
                n,
                censor_rate: rate,
                method,
                attempted: reps,
                excluded: reps - used.len(),
            });
            if !used.is_empty() {
                rows.extend(aggregate(n, rate, method, &truth, &used));
            }
        }
    }
    Ok(StudyReport {
        rows,
        exclusions,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StudyConfig {
        StudyConfig {
            sample_sizes: vec![60],
            censor_rates: vec![0.0],
            replications: Some(1),
            master_seed: 5,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn single_replicate_bias_is_definitional() {
        let config = tiny();
        let report = run_study(&config).unwrap();
        let data = generate_dataset(
            &config.true_theta,
            60,
            CensorSpec::TargetRate { rate: 0.0 },
            &mut SeededRng::new(derive_seed(5, &[0, 0])),
        )
        .unwrap();
        let fit = fit_mle(&data, None, &FitOptions::default(), &QuadratureSpec::default()).unwrap();
        assert!(fit.converged);
        for (k, name) in PARAM_NAMES.iter().enumerate() {
            let row = report.row(60, 0.0, name, Method::Frequentist).unwrap();
            let t = config.true_theta.to_array()[k];
            let expected = (fit.theta_hat.to_array()[k] - t) / t;
            assert_eq!(row.relative_bias, expected);
            assert_eq!(row.relative_mse, expected * expected);
            assert_eq!(row.used, 1);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let config = StudyConfig {
            sample_sizes: vec![40, 80],
            censor_rates: vec![0.0, 0.3],
            replications: Some(6),
            master_seed: 11,
            ..StudyConfig::default()
        };
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.exclusions.len(), 4);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), StudyReport::CSV_HEADER);
        assert_eq!(text.lines().count(), 1 + a.rows.len());
    }

    #[test]
    fn bayesian_rows_present_when_enabled() {
        let config = StudyConfig {
            bayes: Some(BayesStudySettings {
                chain_length: 600,
                burn_in: 100,
                ..BayesStudySettings::default()
            }),
            replications: Some(2),
            ..tiny()
        };
        let report = run_study(&config).unwrap();
        let row = report.row(60, 0.0, "lambda", Method::Bayesian).unwrap();
        assert!(row.coverage >= 0.0 && row.coverage <= 1.0);
        assert!(row.relative_mse >= 0.0);
    }

    #[test]
    fn config_validation_and_defaults() {
        assert_eq!(StudyConfig::default().replications(), 1000);
        let b = StudyConfig {
            bayes: Some(BayesStudySettings::default()),
            ..StudyConfig::default()
        };
        assert_eq!(b.replications(), 200);
        assert_eq!(b.bayes.unwrap().chain_length, 5500);
        let bad = StudyConfig {
            censor_rates: vec![1.0],
            ..tiny()
        };
        assert!(run_study(&bad).is_err());
        let zero = StudyConfig {
            replications: Some(0),
            ..tiny()
        };
        assert!(zero.validate().is_err());
        let json = r#"{"true_theta":{"alpha0":1.63,"alpha1":1.11,"alpha2":1.92,"lambda":2.35},"sample_sizes":[100],"censor_rates":[0.2]}"#;
        let parsed: StudyConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.level, 0.95);
        assert!(serde_json::from_str::<StudyConfig>(r#"{"true_theta":{"alpha0":1,"alpha1":1,"alpha2":1,"lambda":1},"sample_sizes":[1],"censor_rates":[0],"oops":1}"#).is_err());
    }
}
