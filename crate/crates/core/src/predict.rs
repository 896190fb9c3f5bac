//! Within-sample prediction of failures among units censored at a common
//! time `R` during a future window `(R, R + delta]`.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::bayes::PosteriorSample;
use crate::error::{Error, Result};
use crate::model::Params;
use crate::numfmt::fmt_sig;
use crate::quadrature::{integrate_finite, QuadratureSpec};

/// Which failures are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictMode {
    #[serde(rename = "any")]
    Any,
    #[serde(rename = "1")]
    Mode1,
    #[serde(rename = "2")]
    Mode2,
    /// Simultaneous failures of both modes.
    #[serde(rename = "tie")]
    Tie,
}

impl PredictMode {
    pub fn label(&self) -> &'static str {
        match self {
            PredictMode::Any => "any",
            PredictMode::Mode1 => "1",
            PredictMode::Mode2 => "2",
            PredictMode::Tie => "tie",
        }
    }
}

impl std::fmt::Display for PredictMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "any" | "all" => Ok(PredictMode::Any),
            "1" | "mode1" => Ok(PredictMode::Mode1),
            "2" | "mode2" => Ok(PredictMode::Mode2),
            "tie" | "0" => Ok(PredictMode::Tie),
            other => Err(Error::Config(format!("unknown prediction mode '{other}' (expected any, 1, 2 or tie)"))),
        }
    }
}

/// How the level is turned into the two count bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRule {
    /// Each bound is a one-sided bound at `level`: quantiles `1 - level`
    /// and `level`.
    #[default]
    OneSided,
    /// Quantiles `(1 - level)/2` and `(1 + level)/2`.
    EqualTail,
}

impl BoundRule {
    /// Probabilities whose quantiles give the lower and upper bounds.
    pub fn tail_probabilities(&self, level: f64) -> (f64, f64) {
        let g = 1.0 - level;
        match self {
            BoundRule::OneSided => (g, 1.0 - g),
            BoundRule::EqualTail => (0.5 * g, 1.0 - 0.5 * g),
        }
    }
}

impl FromStr for BoundRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "one_sided" => Ok(BoundRule::OneSided),
            "equal_tail" => Ok(BoundRule::EqualTail),
            other => Err(Error::Config(format!("unknown bound rule '{other}' (expected one-sided or equal-tail)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionQuery {
    /// Common censoring time `R`.
    pub censor_time: f64,
    pub delta: f64,
    /// Number of units still on test at `R`.
    pub n_star: u64,
    pub mode: PredictMode,
    pub level: f64,
    #[serde(default)]
    pub bound_rule: BoundRule,
}

impl PredictionQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.censor_time.is_finite() && self.censor_time > 0.0) {
            return Err(Error::Config(format!("censor time must be positive, got {}", self.censor_time)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBounds {
    pub lower: u64,
    pub upper: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub query: PredictionQuery,
    /// Plug-in probability, or its posterior mean on the Bayesian path.
    pub rho_hat: f64,
    pub expected_failures: f64,
    pub median: u64,
    pub bounds: CountBounds,
    /// Predictive probabilities of `0..=n_star` failures.
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl PredictionReport {
    /// Plot-ready `m,pmf,cdf` table.
    pub fn write_pmf_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,pmf,cdf")?;
        for (m, (p, c)) in self.pmf.iter().zip(&self.cdf).enumerate() {
            writeln!(w, "{m},{},{}", fmt_sig(*p), fmt_sig(*c))?;
        }
        Ok(())
    }
}

fn check_window(r: f64, delta: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0 && delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("need R > 0 and delta > 0, got R={r}, delta={delta}")));
    }
    Ok(())
}

/// `P(T <= R + delta | T > R)` for `T = min(X, Y)`.
pub fn rho_any(theta: &Params, r: f64, delta: f64) -> Result<f64> {
    check_window(r, delta)?;
    let exponent = theta.cumulative_hazard(r + delta) - theta.cumulative_hazard(r);
    Ok((-(-exponent).exp_m1()).clamp(0.0, 1.0))
}

/// Probability that the next failure in `(R, R + delta]` is of the given mode.
pub fn rho_mode(theta: &Params, r: f64, delta: f64, mode: PredictMode, quad: &QuadratureSpec) -> Result<f64> {
    check_window(r, delta)?;
    let shape = match mode {
        PredictMode::Any => return rho_any(theta, r, delta),
        PredictMode::Mode1 => theta.alpha1(),
        PredictMode::Mode2 => theta.alpha2(),
        PredictMode::Tie => theta.alpha0(),
    };
    let lambda = theta.lambda();
    let h_r = theta.cumulative_hazard(r);
    let rate = |x: f64| lambda * shape * x.powf(shape - 1.0) * (h_r - theta.cumulative_hazard(x)).exp();
    Ok(integrate_finite(rate, r, r + delta, quad)?.value.clamp(0.0, 1.0))
}

/// Probability for the query's mode.
pub fn rho(theta: &Params, query: &PredictionQuery, quad: &QuadratureSpec) -> Result<f64> {
    rho_mode(theta, query.censor_time, query.delta, query.mode, quad)
}

/// `Binomial(n, p)` probabilities of `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    let n_us = n as usize;
    if p == 0.0 || p == 1.0 {
        let mut v = vec![0.0; n_us + 1];
        v[if p == 0.0 { 0 } else { n_us }] = 1.0;
        return Ok(v);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    Ok((0..=n)
        .map(|m| (ln_binomial(n, m) + m as f64 * lp + (n - m) as f64 * lq).exp())
        .collect())
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = pmf
        .iter()
        .map(|p| {
            acc += p;
            acc.min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// `Binomial(n, p)` CDF at `0..=n`.
pub fn binomial_cdf(n: u64, p: f64) -> Result<Vec<f64>> {
    Ok(cumulative(&binomial_pmf(n, p)?))
}

const CDF_SLACK: f64 = 1e-12;

/// Smallest `m` with `cdf[m] >= prob`, allowing `1e-12` of rounding in the
/// accumulated probabilities.
pub fn quantile_from_cdf(cdf: &[f64], prob: f64) -> u64 {
    cdf.iter().position(|&c| c >= prob - CDF_SLACK).unwrap_or(cdf.len() - 1) as u64
}

fn report_from_cdf(query: &PredictionQuery, rho_hat: f64, cdf: Vec<f64>) -> PredictionReport {
    let (lo, hi) = query.bound_rule.tail_probabilities(query.level);
    let pmf: Vec<f64> = cdf
        .iter()
        .enumerate()
        .map(|(m, c)| if m == 0 { *c } else { (c - cdf[m - 1]).max(0.0) })
        .collect();
    PredictionReport {
        query: *query,
        rho_hat,
        expected_failures: query.n_star as f64 * rho_hat,
        median: quantile_from_cdf(&cdf, 0.5),
        bounds: CountBounds {
            lower: quantile_from_cdf(&cdf, lo),
            upper: quantile_from_cdf(&cdf, hi),
        },
        pmf,
        cdf,
    }
}

/// `M ~ Binomial(n*, rho_hat)` with quantile bounds.
pub fn predict_frequentist(rho_hat: f64, query: &PredictionQuery) -> Result<PredictionReport> {
    query.validate()?;
    let cdf = binomial_cdf(query.n_star, rho_hat)?;
    Ok(report_from_cdf(query, rho_hat, cdf))
}

/// Plug-in prediction at a point estimate.
pub fn predict_plugin(theta: &Params, query: &PredictionQuery, quad: &QuadratureSpec) -> Result<PredictionReport> {
    query.validate()?;
    predict_frequentist(rho(theta, query, quad)?, query)
}

/// Posterior predictive: the binomial CDF averaged over posterior draws.
pub fn predict_bayesian(
    posterior: &PosteriorSample,
    query: &PredictionQuery,
    quad: &QuadratureSpec,
) -> Result<PredictionReport> {
    query.validate()?;
    if posterior.is_empty() {
        return Err(Error::Config("posterior sample has no draws".into()));
    }
    let per_draw: Vec<(f64, Vec<f64>)> = posterior
        .draws
        .par_iter()
        .map(|theta| {
            let r = rho(theta, query, quad)?;
            Ok((r, binomial_cdf(query.n_star, r)?))
        })
        .collect::<Result<_>>()?;
    let k = per_draw.len() as f64;
    let mut cdf = vec![0.0; query.n_star as usize + 1];
    let mut rho_sum = 0.0;
    for (r, c) in &per_draw {
        rho_sum += r;
        for (acc, v) in cdf.iter_mut().zip(c) {
            *acc += v;
        }
    }
    for c in cdf.iter_mut() {
        *c = (*c / k).min(1.0);
    }
    *cdf.last_mut().expect("n_star + 1 entries") = 1.0;
    Ok(report_from_cdf(query, rho_sum / k, cdf))
}
