//! Distribution functions of the bivariate Weibull shock model.
//!
//! Three independent Weibull shocks `U0 ~ We(alpha0, lambda)`,
//! `U1 ~ We(alpha1, lambda)` and `U2 ~ We(alpha2, lambda)` give the pair
//! `X = min(U1, U0)`, `Y = min(U2, U0)`. The shared shock produces the
//! singular component `X = Y`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_semi_infinite, QuadratureSpec};

/// Parameter vector `(alpha0, alpha1, alpha2, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    alpha0: f64,
    alpha1: f64,
    alpha2: f64,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha0: f64,
    alpha1: f64,
    alpha2: f64,
    lambda: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(r.alpha0, r.alpha1, r.alpha2, r.lambda)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            lambda: p.lambda,
        }
    }
}

/// Component names in storage order.
pub const PARAM_NAMES: [&str; 4] = ["alpha0", "alpha1", "alpha2", "lambda"];

impl Params {
    pub fn new(alpha0: f64, alpha1: f64, alpha2: f64, lambda: f64) -> Result<Self> {
        for (name, v) in PARAM_NAMES.iter().zip([alpha0, alpha1, alpha2, lambda]) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            alpha0,
            alpha1,
            alpha2,
            lambda,
        })
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha0, self.alpha1, self.alpha2, self.lambda]
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Sum of the three shapes.
    pub fn alpha_sum(&self) -> f64 {
        self.alpha0 + self.alpha1 + self.alpha2
    }

    /// Cumulative hazard of the minimum, `lambda (t^a0 + t^a1 + t^a2)`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        // same summation order as the joint survival on the diagonal
        self.lambda * (t.powf(self.alpha1) + t.powf(self.alpha2) + t.powf(self.alpha0))
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(alpha0={}, alpha1={}, alpha2={}, lambda={})",
            self.alpha0, self.alpha1, self.alpha2, self.lambda
        )
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        Err(Error::Domain(format!("{name} must be nonnegative, got {v}")))
    } else {
        Ok(())
    }
}

/// Joint survival `P(X >= x, Y >= y)`.
pub fn survival(x: f64, y: f64, theta: &Params) -> Result<f64> {
    check_nonnegative("x", x)?;
    check_nonnegative("y", y)?;
    let z = x.max(y);
    let exponent = theta.lambda * (x.powf(theta.alpha1) + y.powf(theta.alpha2) + z.powf(theta.alpha0));
    Ok((-exponent).exp())
}

/// Survival of the minimum, `S_T(t) = P(min(X, Y) > t)`.
pub fn min_survival(t: f64, theta: &Params) -> Result<f64> {
    check_nonnegative("t", t)?;
    Ok((-theta.cumulative_hazard(t)).exp())
}

/// Density of the absolutely continuous part on `x < y`.
pub fn density_below_diagonal(x: f64, y: f64, theta: &Params) -> f64 {
    let Params {
        alpha0: a0,
        alpha1: a1,
        alpha2: a2,
        lambda: l,
    } = *theta;
    l * l
        * a1
        * x.powf(a1 - 1.0)
        * (a2 * y.powf(a2 - 1.0) + a0 * y.powf(a0 - 1.0))
        * (-l * (x.powf(a1) + y.powf(a2) + y.powf(a0))).exp()
}

/// Density of the absolutely continuous part on `y < x`.
pub fn density_above_diagonal(x: f64, y: f64, theta: &Params) -> f64 {
    let Params {
        alpha0: a0,
        alpha1: a1,
        alpha2: a2,
        lambda: l,
    } = *theta;
    l * l
        * a2
        * y.powf(a2 - 1.0)
        * (a1 * x.powf(a1 - 1.0) + a0 * x.powf(a0 - 1.0))
        * (-l * (y.powf(a2) + x.powf(a1) + x.powf(a0))).exp()
}

/// `-d/dx S_0(x)`: density of the minimum lifetime.
pub fn min_density(t: f64, theta: &Params) -> f64 {
    let Params {
        alpha0: a0,
        alpha1: a1,
        alpha2: a2,
        lambda: l,
    } = *theta;
    l * (a0 * t.powf(a0 - 1.0) + a1 * t.powf(a1 - 1.0) + a2 * t.powf(a2 - 1.0))
        * (-theta.cumulative_hazard(t)).exp()
}

/// `P(X = Y)`, computed as one minus the integrated Mode 1 and Mode 2 rates.
///
/// Each rate `int lambda a_k x^(a_k - 1) S_T(x) dx` is integrated after the
/// substitution `s = x^(a_k)`, which removes the `x^(a_k - 1)` endpoint
/// singularity and leaves a bounded integrand.
pub fn tie_probability(theta: &Params, quad: &QuadratureSpec) -> Result<f64> {
    let a = theta.to_array();
    let l = theta.lambda;
    let mut rate_sum = 0.0;
    let mut err_sum = 0.0;
    for k in [1usize, 2] {
        let others: Vec<f64> = [0usize, 1, 2]
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| a[j] / a[k])
            .collect();
        let est = integrate_semi_infinite(
            |s| l * (-l * (s + s.powf(others[0]) + s.powf(others[1]))).exp(),
            quad,
        )?;
        rate_sum += est.value;
        err_sum += est.error;
    }
    let p = 1.0 - rate_sum;
    let slack = err_sum + quad.abs_tol.max(quad.rel_tol);
    if p < 0.0 {
        if -p <= slack {
            Ok(0.0)
        } else {
            Err(Error::ProbabilityOvershoot(p))
        }
    } else if p > 1.0 {
        if p - 1.0 <= slack {
            Ok(1.0)
        } else {
            Err(Error::ProbabilityOvershoot(p))
        }
    } else {
        Ok(p)
    }
}

/// Mean time to failure of the series system, `int_0^inf S_T(t) dt`.
pub fn mttf(theta: &Params, quad: &QuadratureSpec) -> Result<f64> {
    let est = integrate_semi_infinite(|t| (-theta.cumulative_hazard(t)).exp(), quad)?;
    Ok(est.value)
}

/// Evaluation context for one parameter vector. Caches the tie probability,
/// so diagonal density evaluations pay for the quadrature once.
#[derive(Debug)]
pub struct Mobwds {
    params: Params,
    quad: QuadratureSpec,
    tie: OnceLock<f64>,
}

impl Mobwds {
    pub fn new(params: Params, quad: QuadratureSpec) -> Self {
        Self {
            params,
            quad,
            tie: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn quad(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn survival(&self, x: f64, y: f64) -> Result<f64> {
        survival(x, y, &self.params)
    }

    pub fn min_survival(&self, t: f64) -> Result<f64> {
        min_survival(t, &self.params)
    }

    pub fn tie_probability(&self) -> Result<f64> {
        if let Some(p) = self.tie.get() {
            return Ok(*p);
        }
        let p = tie_probability(&self.params, &self.quad)?;
        Ok(*self.tie.get_or_init(|| p))
    }

    /// Joint density. On the diagonal this is `P(X = Y) * (-S_0'(x))`.
    pub fn density(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Domain(format!(
                "density requires positive finite arguments, got ({x}, {y})"
            )));
        }
        if x < y {
            Ok(density_below_diagonal(x, y, &self.params))
        } else if y < x {
            Ok(density_above_diagonal(x, y, &self.params))
        } else {
            Ok(self.tie_probability()? * min_density(x, &self.params))
        }
    }

    pub fn mttf(&self) -> Result<f64> {
        mttf(&self.params, &self.quad)
    }
}
