//! Gamma–Dirichlet x gamma prior, Metropolis–Hastings with a folded-normal
//! random-walk proposal, posterior summaries and chain diagnostics.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood, Interval};
use crate::model::{mttf, Params};
use crate::numfmt::fmt_sig;
use crate::quadrature::QuadratureSpec;
use crate::sampling::{derive_seed, SeededRng};

/// Hyperparameters: `GD(a, b, a0, a1, a2)` on the shapes, `GA(c1, c2)` on
/// lambda with rate `c1` and shape `c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            a: 0.005,
            b: 0.005,
            a0: 1.2,
            a1: 1.2,
            a2: 1.2,
            c1: 0.005,
            c2: 0.005,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.a0, self.a1, self.a2, self.c1, self.c2];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("hyperparameters must be positive: {self:?}")))
        }
    }

    /// `a0 + a1 + a2`.
    pub fn a_bar(&self) -> f64 {
        self.a0 + self.a1 + self.a2
    }
}

/// Gamma log-density with shape `k` and rate `r`.
pub fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log prior density, normalizing constants included.
pub fn log_prior(theta: &Params, hyper: &Hyperparams) -> f64 {
    let h = hyper;
    let alpha = theta.alpha_sum();
    let shapes = [theta.alpha0(), theta.alpha1(), theta.alpha2()];
    let shape_hyper = [h.a0, h.a1, h.a2];
    let a_bar = h.a_bar();
    let mut lp = ln_gamma_density(theta.lambda(), h.c2, h.c1);
    lp += ln_gamma(a_bar) - ln_gamma(h.a);
    if h.a != a_bar {
        lp += (h.a - a_bar) * (h.b * alpha).ln();
    }
    for (x, ai) in shapes.iter().zip(shape_hyper) {
        lp += ln_gamma_density(*x, ai, h.b);
    }
    lp
}

/// Unnormalized log target for the sampler.
pub trait LogTarget: Sync {
    fn log_density(&self, theta: &Params) -> Result<f64>;
}

/// Posterior `L(theta) * prior(theta)`.
#[derive(Debug, Clone, Copy)]
pub struct Posterior<'a> {
    pub data: &'a Dataset,
    pub hyper: Hyperparams,
    pub quad: QuadratureSpec,
}

impl LogTarget for Posterior<'_> {
    fn log_density(&self, theta: &Params) -> Result<f64> {
        log_posterior(theta, self.data, &self.hyper, &self.quad)
    }
}

/// The prior alone, used to test the sampler against known moments.
#[derive(Debug, Clone, Copy)]
pub struct PriorOnly(pub Hyperparams);

impl LogTarget for PriorOnly {
    fn log_density(&self, theta: &Params) -> Result<f64> {
        Ok(log_prior(theta, &self.0))
    }
}

pub fn log_posterior(theta: &Params, data: &Dataset, hyper: &Hyperparams, quad: &QuadratureSpec) -> Result<f64> {
    Ok(log_likelihood(theta, data, quad)? + log_prior(theta, hyper))
}

/// Per-coordinate standard deviations of the folded-normal proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub sigma: [f64; 4],
}

impl Default for ProposalSpec {
    /// `Sigma = I/2`.
    fn default() -> Self {
        Self {
            sigma: [std::f64::consts::FRAC_1_SQRT_2; 4],
        }
    }
}

impl ProposalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("proposal sigmas must be positive: {:?}", self.sigma)))
        }
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of the product of independent folded normals
/// `|N(mu_i, sigma_i^2)|` at `x`.
pub fn folded_normal_log_density(x: &[f64; 4], mu: &[f64; 4], sigma: &ProposalSpec) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..4 {
        if x[i].is_nan() || x[i] < 0.0 {
            return Err(Error::Domain(format!("folded normal support is [0, inf), got {}", x[i])));
        }
        let s = sigma.sigma[i];
        let zm = (x[i] - mu[i]) / s;
        let zp = (x[i] + mu[i]) / s;
        // log(phi(zm) + phi(zp)) without underflow
        let (hi, lo) = if zm.abs() <= zp.abs() { (zm, zp) } else { (zp, zm) };
        let log_hi = -0.5 * hi * hi;
        let log_lo = -0.5 * lo * lo;
        total += log_hi + (log_lo - log_hi).exp().ln_1p() - LN_SQRT_2PI - s.ln();
    }
    Ok(total)
}

/// Chain length and burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub chain_length: usize,
    pub burn_in: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            chain_length: 15_500,
            burn_in: 500,
        }
    }
}

/// Post burn-in draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub draws: Vec<Params>,
    /// Whether the move into each stored draw was accepted.
    pub accepted: Vec<bool>,
    pub burn_in: usize,
    /// Accepted moves over all iterations, burn-in included.
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl PosteriorSample {
    /// Wraps externally obtained draws (e.g. read back from CSV).
    pub fn from_draws(draws: Vec<Params>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Config("posterior sample has no draws".into()));
        }
        let n = draws.len();
        Ok(Self {
            draws,
            accepted: vec![false; n],
            burn_in: 0,
            acceptance_rate: f64::NAN,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draws of one component.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.to_array()[k]).collect()
    }
}

#[derive(Serialize)]
struct ChainState<'a> {
    current: &'a Params,
    proposal: [f64; 4],
}

/// Random-walk Metropolis–Hastings with folded-normal proposals.
///
/// Every iteration consumes four normals and one uniform, so the stream
/// position does not depend on accept/reject decisions.
pub fn mh_sample<T: LogTarget + ?Sized>(
    target: &T,
    init: Params,
    settings: ChainSettings,
    proposal: &ProposalSpec,
    rng: &mut SeededRng,
) -> Result<PosteriorSample> {
    proposal.validate()?;
    if settings.chain_length <= settings.burn_in {
        return Err(Error::Config(format!(
            "chain length {} must exceed burn-in {}",
            settings.chain_length, settings.burn_in
        )));
    }
    let mut current = init;
    let mut current_lp = target.log_density(&current)?;
    if !current_lp.is_finite() {
        return Err(Error::Config(format!("initial state {init} has zero target density")));
    }
    let keep = settings.chain_length - settings.burn_in;
    let mut draws = Vec::with_capacity(keep);
    let mut flags = Vec::with_capacity(keep);
    let mut n_accepted = 0usize;
    for iter in 0..settings.chain_length {
        let mu = current.to_array();
        let mut prop = [0.0; 4];
        for k in 0..4 {
            let z: f64 = StandardNormal.sample(rng.inner_mut());
            prop[k] = (mu[k] + proposal.sigma[k] * z).abs();
        }
        let log_u = rng.open01().ln();
        let mut accepted = false;
        if let Ok(candidate) = Params::from_array(prop) {
            let lp = target.log_density(&candidate).map_err(|e| Error::ChainAborted {
                iteration: iter,
                state: serde_json::to_string(&ChainState {
                    current: &current,
                    proposal: prop,
                })
                .unwrap_or_default(),
                source: Box::new(e),
            })?;
            if lp.is_finite() && log_u < lp - current_lp {
                current = candidate;
                current_lp = lp;
                accepted = true;
                n_accepted += 1;
            }
        }
        if iter >= settings.burn_in {
            draws.push(current);
            flags.push(accepted);
        }
    }
    Ok(PosteriorSample {
        draws,
        accepted: flags,
        burn_in: settings.burn_in,
        acceptance_rate: n_accepted as f64 / settings.chain_length as f64,
        seed: rng.seed(),
    })
}

/// Runs one chain per start in parallel; chain `i` is seeded with
/// `derive_seed(master_seed, [i])`.
pub fn run_chains<T: LogTarget + ?Sized>(
    target: &T,
    starts: &[Params],
    settings: ChainSettings,
    proposal: &ProposalSpec,
    master_seed: u64,
) -> Result<Vec<PosteriorSample>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(i, start)| {
            let mut rng = SeededRng::new(derive_seed(master_seed, &[i as u64]));
            mh_sample(target, *start, settings, proposal, &mut rng)
        })
        .collect()
}

/// Starts spread around `base` by the component-wise factors 1, 1/2, 2, 3/2, ...
pub fn dispersed_starts(base: &Params, count: usize) -> Vec<Params> {
    const FACTORS: [f64; 6] = [1.0, 0.5, 2.0, 1.5, 0.75, 3.0];
    (0..count)
        .map(|i| {
            let f = FACTORS[i % FACTORS.len()];
            Params::from_array(base.to_array().map(|v| v * f)).expect("positive scaling keeps validity")
        })
        .collect()
}

/// Header of the chain export.
pub const CHAIN_CSV_HEADER: &str = "iter,alpha0,alpha1,alpha2,lambda,accepted";

/// One row per stored draw; `iter` counts from the first post burn-in
/// iteration as `burn_in + 1`.
pub fn write_chain_csv<W: Write>(sample: &PosteriorSample, mut w: W) -> Result<()> {
    writeln!(w, "{CHAIN_CSV_HEADER}")?;
    for (i, (d, acc)) in sample.draws.iter().zip(&sample.accepted).enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            sample.burn_in + i + 1,
            fmt_sig(d.alpha0()),
            fmt_sig(d.alpha1()),
            fmt_sig(d.alpha2()),
            fmt_sig(d.lambda()),
            u8::from(*acc)
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct ChainRow {
    iter: usize,
    alpha0: f64,
    alpha1: f64,
    alpha2: f64,
    lambda: f64,
    accepted: u8,
}

/// Reads a chain written by [`write_chain_csv`]. The acceptance rate of the
/// stored rows is used in place of the whole-chain rate.
pub fn read_chain_csv<R: Read>(source: R) -> Result<PosteriorSample> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CHAIN_CSV_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{CHAIN_CSV_HEADER}'"),
        });
    }
    let mut draws = Vec::new();
    let mut accepted = Vec::new();
    let mut first_iter = None;
    for row in reader.deserialize::<ChainRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = draws.len() + 2;
        let theta = Params::new(row.alpha0, row.alpha1, row.alpha2, row.lambda).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        first_iter.get_or_insert(row.iter);
        draws.push(theta);
        accepted.push(row.accepted != 0);
    }
    if draws.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rate = accepted.iter().filter(|a| **a).count() as f64 / accepted.len() as f64;
    Ok(PosteriorSample {
        draws,
        accepted,
        burn_in: first_iter.unwrap_or(1).saturating_sub(1),
        acceptance_rate: rate,
        seed: 0,
    })
}

/// Posterior means, population variances and equal-tail credible intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: [f64; 4],
    pub variance: [f64; 4],
    pub level: f64,
    pub intervals: [Interval; 4],
}

/// 1-based order-statistic indices `floor(g/2 n)` and `floor((1 - g/2) n)`,
/// clamped to `[1, n]`.
pub fn credible_indices(n: usize, level: f64) -> (usize, usize) {
    let g = 1.0 - level;
    let idx = |x: f64| ((x + 1e-9).floor() as usize).clamp(1, n);
    (idx(0.5 * g * n as f64), idx((1.0 - 0.5 * g) * n as f64))
}

pub fn posterior_summary(sample: &PosteriorSample, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    if sample.is_empty() {
        return Err(Error::Config("posterior sample has no draws".into()));
    }
    let n = sample.len();
    let (lo, hi) = credible_indices(n, level);
    let mut mean = [0.0; 4];
    let mut variance = [0.0; 4];
    let mut intervals = [Interval { lower: 0.0, upper: 0.0 }; 4];
    for k in 0..4 {
        let mut xs = sample.component(k);
        let m = xs.iter().sum::<f64>() / n as f64;
        mean[k] = m;
        variance[k] = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        xs.sort_by(f64::total_cmp);
        intervals[k] = Interval {
            lower: xs[lo - 1],
            upper: xs[hi - 1],
        };
    }
    Ok(PosteriorSummary {
        mean,
        variance,
        level,
        intervals,
    })
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction factor per parameter.
pub fn gelman_rubin(chains: &[PosteriorSample]) -> Result<[f64; 4]> {
    if chains.len() < 2 {
        return Err(Error::Config("Gelman-Rubin needs at least two chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config("chains must have equal length".into()));
    }
    if n < 10 {
        return Err(Error::Config(format!("chains need at least 10 draws, got {n}")));
    }
    let nf = n as f64;
    Ok(std::array::from_fn(|k| {
        let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_and_var(&c.component(k))).collect();
        let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
        let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let b_over_n = mean_and_var(&means).1;
        (((nf - 1.0) / nf * w + b_over_n) / w).sqrt()
    }))
}

/// Sample autocorrelation of one series at lags `0..=max_lag`. A constant
/// series has correlation 1 at lag 0 and 0 elsewhere.
pub fn autocorrelation_series(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= xs.len() {
        return Err(Error::Config(format!(
            "max_lag {max_lag} must be below the series length {}",
            xs.len()
        )));
    }
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                1.0
            } else if c0 == 0.0 {
                0.0
            } else {
                dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

/// Autocorrelations per parameter, `result[k][lag]`.
pub fn autocorrelation(sample: &PosteriorSample, max_lag: usize) -> Result<[Vec<f64>; 4]> {
    let mut out: [Vec<f64>; 4] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = autocorrelation_series(&sample.component(k), max_lag)?;
    }
    Ok(out)
}

/// Batch-means standard error of the mean of a correlated series.
pub fn monte_carlo_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    (mean_and_var(&means).1 / batches as f64).sqrt()
}

/// Posterior mean of the MTTF, averaging the plug-in MTTF over the draws.
pub fn posterior_mttf(sample: &PosteriorSample, quad: &QuadratureSpec) -> Result<f64> {
    let values: Vec<f64> = sample
        .draws
        .par_iter()
        .map(|d| mttf(d, quad))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
