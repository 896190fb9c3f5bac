//! Marshall–Olkin bivariate Weibull model with distinct shape parameters for
//! censored reliability data with two dependent failure modes.
//!
//! The crate covers distribution evaluation ([`model`]), exact simulation
//! ([`sampling`]), maximum-likelihood fitting ([`likelihood`]), Bayesian
//! inference by Metropolis–Hastings ([`bayes`]), prediction of failures among
//! censored units ([`predict`]) and a Monte Carlo study harness
//! ([`simstudy`]).

pub mod bayes;
pub mod dataio;
pub mod error;
pub mod likelihood;
pub mod model;
pub mod numfmt;
pub mod optim;
pub mod predict;
pub mod quadrature;
pub mod sampling;
pub mod simstudy;

pub use dataio::{kaplan_meier, parse_csv, Cause, Dataset, Record, StepFunction};
pub use error::{Error, Result};
pub use likelihood::{fit_mle, log_likelihood, FitOptions, FitResult, Interval};
pub use model::{Mobwds, Params};
pub use quadrature::QuadratureSpec;
pub use sampling::{CensorSpec, SeededRng};
