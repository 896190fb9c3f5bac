//! Censored competing-risks log-likelihood, maximum-likelihood fitting and
//! Wald intervals from the observed information.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataio::{Cause, Dataset};
use crate::error::{Error, Result};
use crate::model::{tie_probability, Params, PARAM_NAMES};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::quadrature::QuadratureSpec;

/// Log-likelihood of `theta` for the censored two-mode data.
///
/// When the data contain no ties the `m0 log P(X = Y)` term vanishes and no
/// quadrature is performed.
pub fn log_likelihood(theta: &Params, data: &Dataset, quad: &QuadratureSpec) -> Result<f64> {
    let [a0, a1, a2, l] = theta.to_array();
    let s = data.summary();
    let mut hazard_sum = 0.0;
    let mut tie_terms = 0.0;
    let mut log_t1 = 0.0;
    let mut log_t2 = 0.0;
    for r in data.records() {
        let t = r.time();
        let (p0, p1, p2) = (t.powf(a0), t.powf(a1), t.powf(a2));
        hazard_sum += p0 + p1 + p2;
        match r.cause() {
            Cause::Tie => tie_terms += ((a0 * p0 + a1 * p1 + a2 * p2) / t).ln(),
            Cause::Mode1 => log_t1 += t.ln(),
            Cause::Mode2 => log_t2 += t.ln(),
            Cause::Censored => {}
        }
    }
    let mut ll = -l * hazard_sum
        + tie_terms
        + (a1 - 1.0) * log_t1
        + (a2 - 1.0) * log_t2
        + s.failures() as f64 * l.ln();
    if s.m1 > 0 {
        ll += s.m1 as f64 * a1.ln();
    }
    if s.m2 > 0 {
        ll += s.m2 as f64 * a2.ln();
    }
    if s.m0 > 0 {
        ll += s.m0 as f64 * tie_probability(theta, quad)?.ln();
    }
    Ok(ll)
}

/// Central-difference Hessian of `f` at `x` with steps `h_i = 1e-4 max(1, |x_i|)`.
pub fn numerical_hessian<F>(f: F, x: [f64; 4]) -> Result<Matrix4<f64>>
where
    F: Fn([f64; 4]) -> Result<f64>,
{
    let h: [f64; 4] = std::array::from_fn(|i| 1e-4 * x[i].abs().max(1.0));
    let at = |di: [f64; 4]| -> Result<f64> {
        let mut p = x;
        for k in 0..4 {
            p[k] += di[k];
        }
        f(p)
    };
    let f0 = f(x)?;
    let mut hess = Matrix4::zeros();
    for i in 0..4 {
        let mut e = [0.0; 4];
        e[i] = h[i];
        let fp = at(e)?;
        e[i] = -h[i];
        let fm = at(e)?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..4 {
            let mut d = [0.0; 4];
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                d = [0.0; 4];
                d[i] = si * h[i];
                d[j] = sj * h[j];
                at(d)
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((hess + hess.transpose()) * 0.5)
}

/// Observed Fisher information `-d2 log L` at `theta_hat`, on the original scale.
pub fn observed_information(
    theta_hat: &Params,
    data: &Dataset,
    quad: &QuadratureSpec,
) -> Result<Matrix4<f64>> {
    let x = theta_hat.to_array();
    for (name, v) in PARAM_NAMES.iter().zip(x) {
        let step = 1e-4 * v.max(1.0);
        if v <= 10.0 * step {
            return Err(Error::Domain(format!(
                "{name} = {v} is too close to the boundary for finite differences"
            )));
        }
    }
    let hess = numerical_hessian(|p| log_likelihood(&Params::from_array(p)?, data, quad), x)?;
    Ok(-hess)
}

/// Closed interval for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Inverse of the information matrix, rejecting near-singular cases.
pub fn covariance(info: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let sv = info.singular_values();
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::SingularInformation { condition });
    }
    let inv = info
        .try_inverse()
        .ok_or(Error::SingularInformation { condition })?;
    if (0..4).any(|i| !(inv[(i, i)] > 0.0)) {
        // not positive definite at this point
        return Err(Error::SingularInformation { condition });
    }
    Ok(inv)
}

/// `theta_i +- z sqrt((J^-1)_ii)`, lower bounds truncated at zero.
pub fn wald_intervals_from(theta_hat: &Params, info: &Matrix4<f64>, level: f64) -> Result<[Interval; 4]> {
    check_level(level)?;
    let cov = covariance(info)?;
    let z = normal_quantile(0.5 * (1.0 + level));
    let x = theta_hat.to_array();
    Ok(std::array::from_fn(|i| {
        let half = z * cov[(i, i)].sqrt();
        Interval {
            lower: (x[i] - half).max(0.0),
            upper: x[i] + half,
        }
    }))
}

pub fn wald_intervals(fit: &FitResult, level: f64) -> Result<[Interval; 4]> {
    let info = fit
        .info_matrix()
        .ok_or(Error::SingularInformation { condition: f64::INFINITY })?;
    wald_intervals_from(&fit.theta_hat, &info, level)
}

/// Settings for [`fit_mle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub optimizer: NelderMeadOptions,
    pub level: f64,
    /// Components held at a fixed value instead of optimized.
    pub fixed: [Option<f64>; 4],
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: NelderMeadOptions::default(),
            level: 0.95,
            fixed: [None; 4],
        }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Params,
    pub loglik: f64,
    /// Observed information, row-major; absent if it could not be computed.
    pub info: Option<[[f64; 4]; 4]>,
    pub level: f64,
    /// Absent when the information matrix could not be inverted.
    pub intervals: Option<[Interval; 4]>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn info_matrix(&self) -> Option<Matrix4<f64>> {
        self.info.map(|rows| Matrix4::from_fn(|i, j| rows[i][j]))
    }
}

/// Moment start: unit shapes and the exponential-model rate.
pub fn default_init(data: &Dataset) -> Result<Params> {
    let failures = data.summary().failures();
    if failures == 0 {
        return Err(Error::DegenerateData("every record is censored".into()));
    }
    let total: f64 = data.records().iter().map(|r| r.time()).sum();
    Params::new(1.0, 1.0, 1.0, failures as f64 / (3.0 * total))
}

/// Maximizes the log-likelihood with Nelder–Mead over `ln theta`.
pub fn fit_mle(
    data: &Dataset,
    init: Option<Params>,
    opts: &FitOptions,
    quad: &QuadratureSpec,
) -> Result<FitResult> {
    check_level(opts.level)?;
    let s = data.summary();
    if s.failures() == 0 {
        return Err(Error::DegenerateData("every record is censored".into()));
    }
    let mut start = init.map_or_else(|| default_init(data), Ok)?.to_array();
    for (k, fixed) in opts.fixed.iter().enumerate() {
        if let Some(v) = fixed {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Config(format!("fixed {} must be positive", PARAM_NAMES[k])));
            }
            start[k] = *v;
        }
    }
    let free: Vec<usize> = (0..4).filter(|&k| opts.fixed[k].is_none()).collect();
    let assemble = |xi: &[f64]| -> [f64; 4] {
        let mut p = start;
        for (slot, &k) in free.iter().enumerate() {
            p[k] = xi[slot].exp();
        }
        p
    };
    let objective = |xi: &[f64]| -> f64 {
        Params::from_array(assemble(xi))
            .and_then(|p| log_likelihood(&p, data, quad))
            .map_or(f64::INFINITY, |ll| -ll)
    };
    let xi0: Vec<f64> = free.iter().map(|&k| start[k].ln()).collect();
    let min = nelder_mead(objective, &xi0, &opts.optimizer);
    let theta_hat = Params::from_array(assemble(&min.x))?;
    let loglik = log_likelihood(&theta_hat, data, quad)?;

    let mut notes = Vec::new();
    if s.m0 == 0 {
        notes.push("no tied failures: alpha0 is informed only through the survival term".to_string());
    }
    if !min.converged {
        notes.push(format!("optimizer stopped after {} iterations without converging", min.iterations));
    }
    let (info, intervals) = match observed_information(&theta_hat, data, quad) {
        Ok(info) => {
            let intervals = match wald_intervals_from(&theta_hat, &info, opts.level) {
                Ok(iv) => Some(iv),
                Err(e) => {
                    notes.push(format!("no Wald intervals: {e}"));
                    None
                }
            };
            let rows: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| info[(i, j)]));
            (Some(rows), intervals)
        }
        Err(e) => {
            notes.push(format!("no observed information: {e}"));
            (None, None)
        }
    };
    Ok(FitResult {
        theta_hat,
        loglik,
        info,
        level: opts.level,
        intervals,
        converged: min.converged,
        iterations: min.iterations,
        evaluations: min.evaluations,
        notes,
    })
}
