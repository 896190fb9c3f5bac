//! Python bindings for `mobwds`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mobwds::bayes::{self, ChainSettings, Hyperparams, Posterior, ProposalSpec};
use mobwds::predict::{self, BoundRule, PredictMode, PredictionQuery};
use mobwds::sampling::{generate_dataset, CensorSpec, SeededRng};
use mobwds::{model, parse_csv, FitOptions, QuadratureSpec};

fn to_py(e: mobwds::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[pyclass(name = "Params", module = "mobwds_py", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyParams(pub mobwds::Params);

#[pymethods]
impl PyParams {
    #[new]
    fn new(alpha0: f64, alpha1: f64, alpha2: f64, lam: f64) -> PyResult<Self> {
        mobwds::Params::new(alpha0, alpha1, alpha2, lam).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0()
    }
    #[getter]
    fn alpha1(&self) -> f64 {
        self.0.alpha1()
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.0.alpha2()
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    fn to_list(&self) -> [f64; 4] {
        self.0.to_array()
    }

    /// Joint survival P(X > x, Y > y).
    fn survival(&self, x: f64, y: f64) -> PyResult<f64> {
        model::survival(x, y, &self.0).map_err(to_py)
    }

    fn min_survival(&self, t: f64) -> PyResult<f64> {
        model::min_survival(t, &self.0).map_err(to_py)
    }

    /// Continuous part of the joint density; zero on the diagonal.
    fn density(&self, x: f64, y: f64) -> PyResult<f64> {
        mobwds::Mobwds::new(self.0, quad()).density(x, y).map_err(to_py)
    }

    fn tie_probability(&self) -> PyResult<f64> {
        model::tie_probability(&self.0, &quad()).map_err(to_py)
    }

    fn mttf(&self) -> PyResult<f64> {
        model::mttf(&self.0, &quad()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let [a0, a1, a2, l] = self.0.to_array();
        format!("Params(alpha0={a0}, alpha1={a1}, alpha2={a2}, lam={l})")
    }
}

#[pyclass(name = "Dataset", module = "mobwds_py", frozen)]
pub struct PyDataset(pub mobwds::Dataset);

#[pymethods]
impl PyDataset {
    /// Parses `time,cause` CSV text; causes are `1`, `2`, `tie` or `censored`.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        parse_csv(text.as_bytes()).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        parse_csv(file).map(Self).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv_string()
    }

    fn rescaled(&self, scale: f64) -> PyResult<Self> {
        self.0.rescaled(scale).map(Self).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn times(&self) -> Vec<f64> {
        self.0.records().iter().map(|r| r.time()).collect()
    }

    fn causes(&self) -> Vec<&'static str> {
        self.0.records().iter().map(|r| r.cause().label()).collect()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.0.summary();
        let d = PyDict::new(py);
        d.set_item("n", s.n)?;
        d.set_item("ties", s.m0)?;
        d.set_item("mode1", s.m1)?;
        d.set_item("mode2", s.m2)?;
        d.set_item("censored", s.n_censored)?;
        Ok(d)
    }

    /// Kaplan-Meier estimate as (jump times, survival after each jump).
    fn kaplan_meier(&self) -> (Vec<f64>, Vec<f64>) {
        let km = mobwds::kaplan_meier(&self.0);
        (km.jump_times().to_vec(), km.values().to_vec())
    }

    fn log_likelihood(&self, theta: &PyParams) -> PyResult<f64> {
        mobwds::log_likelihood(&theta.0, &self.0, &quad()).map_err(to_py)
    }
}

/// Simulates `n` units; give at most one of `censor_rate` and `censor_time`.
#[pyfunction]
#[pyo3(signature = (theta, n, seed = 1, censor_rate = None, censor_time = None))]
fn generate(theta: &PyParams, n: usize, seed: u64, censor_rate: Option<f64>, censor_time: Option<f64>) -> PyResult<PyDataset> {
    let censor = match (censor_rate, censor_time) {
        (None, None) => CensorSpec::None,
        (Some(r), None) => CensorSpec::TargetRate { rate: r },
        (None, Some(c)) => CensorSpec::FixedTime { time: c },
        _ => return Err(PyValueError::new_err("give censor_rate or censor_time, not both")),
    };
    let mut rng = SeededRng::new(seed);
    generate_dataset(&theta.0, n, censor, &mut rng).map(PyDataset).map_err(to_py)
}

/// Maximum-likelihood fit. Returns a dict with `theta_hat`, `loglik`,
/// `intervals` (list of (lower, upper) or None), `converged`, `iterations`.
#[pyfunction]
#[pyo3(signature = (data, init = None, level = 0.95))]
fn fit_mle<'py>(py: Python<'py>, data: &PyDataset, init: Option<PyParams>, level: f64) -> PyResult<Bound<'py, PyDict>> {
    let opts = FitOptions { level, ..FitOptions::default() };
    let fit = mobwds::fit_mle(&data.0, init.map(|p| p.0), &opts, &quad()).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("theta_hat", PyParams(fit.theta_hat))?;
    d.set_item("loglik", fit.loglik)?;
    d.set_item(
        "intervals",
        fit.intervals.map(|iv| iv.iter().map(|i| (i.lower, i.upper)).collect::<Vec<_>>()),
    )?;
    d.set_item("info", fit.info)?;
    d.set_item("converged", fit.converged)?;
    d.set_item("iterations", fit.iterations)?;
    d.set_item("notes", fit.notes)?;
    Ok(d)
}

#[pyclass(name = "PosteriorSample", module = "mobwds_py", frozen)]
pub struct PySample(pub bayes::PosteriorSample);

#[pymethods]
impl PySample {
    #[getter]
    fn draws(&self) -> Vec<[f64; 4]> {
        self.0.draws.iter().map(|p| p.to_array()).collect()
    }

    #[getter]
    fn accepted(&self) -> Vec<bool> {
        self.0.accepted.clone()
    }

    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.0.acceptance_rate
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Posterior means, variances and equal-tail credible intervals.
    #[pyo3(signature = (level = 0.95))]
    fn summary<'py>(&self, py: Python<'py>, level: f64) -> PyResult<Bound<'py, PyDict>> {
        let s = bayes::posterior_summary(&self.0, level).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mean", s.mean)?;
        d.set_item("variance", s.variance)?;
        d.set_item("intervals", s.intervals.iter().map(|i| (i.lower, i.upper)).collect::<Vec<_>>())?;
        Ok(d)
    }

    fn mttf(&self) -> PyResult<f64> {
        bayes::posterior_mttf(&self.0, &quad()).map_err(to_py)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        bayes::write_chain_csv(&self.0, &mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Random-walk Metropolis-Hastings with a folded-normal proposal.
/// `hyper` is (a, b, a0, a1, a2, c1, c2).
#[pyfunction]
#[pyo3(signature = (data, init, chain_length = 15_500, burn_in = 500, sigma = None, seed = 1, hyper = None))]
#[allow(clippy::too_many_arguments)]
fn mh_sample(
    py: Python<'_>,
    data: &PyDataset,
    init: &PyParams,
    chain_length: usize,
    burn_in: usize,
    sigma: Option<[f64; 4]>,
    seed: u64,
    hyper: Option<[f64; 7]>,
) -> PyResult<PySample> {
    let hyper = match hyper {
        Some([a, b, a0, a1, a2, c1, c2]) => Hyperparams { a, b, a0, a1, a2, c1, c2 },
        None => Hyperparams::default(),
    };
    let proposal = sigma.map(|sigma| ProposalSpec { sigma }).unwrap_or_default();
    let settings = ChainSettings { chain_length, burn_in };
    let init = init.0;
    let data = &data.0;
    py.detach(move || {
        let target = Posterior { data, hyper, quad: quad() };
        let mut rng = SeededRng::new(seed);
        bayes::mh_sample(&target, init, settings, &proposal, &mut rng)
    })
    .map(PySample)
    .map_err(to_py)
}

fn query(censor_time: f64, delta: f64, n_star: u64, mode: &str, level: f64, bound_rule: &str) -> PyResult<PredictionQuery> {
    let mode: PredictMode = mode.parse().map_err(to_py)?;
    let bound_rule: BoundRule = bound_rule.parse().map_err(to_py)?;
    Ok(PredictionQuery { censor_time, delta, n_star, mode, level, bound_rule })
}

fn report_dict<'py>(py: Python<'py>, r: &predict::PredictionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rho_hat", r.rho_hat)?;
    d.set_item("expected_failures", r.expected_failures)?;
    d.set_item("median", r.median)?;
    d.set_item("bounds", (r.bounds.lower, r.bounds.upper))?;
    d.set_item("pmf", r.pmf.clone())?;
    d.set_item("cdf", r.cdf.clone())?;
    Ok(d)
}

/// Plug-in prediction of failures in (R, R + delta] among `n_star` units
/// censored at R.
#[pyfunction]
#[pyo3(signature = (theta, censor_time, delta, n_star, mode = "any", level = 0.95, bound_rule = "one-sided"))]
#[allow(clippy::too_many_arguments)]
fn predict_plugin<'py>(
    py: Python<'py>,
    theta: &PyParams,
    censor_time: f64,
    delta: f64,
    n_star: u64,
    mode: &str,
    level: f64,
    bound_rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let q = query(censor_time, delta, n_star, mode, level, bound_rule)?;
    let r = predict::predict_plugin(&theta.0, &q, &quad()).map_err(to_py)?;
    report_dict(py, &r)
}

/// Posterior predictive counterpart of [`predict_plugin`].
#[pyfunction]
#[pyo3(signature = (sample, censor_time, delta, n_star, mode = "any", level = 0.95, bound_rule = "one-sided"))]
#[allow(clippy::too_many_arguments)]
fn predict_bayesian<'py>(
    py: Python<'py>,
    sample: &PySample,
    censor_time: f64,
    delta: f64,
    n_star: u64,
    mode: &str,
    level: f64,
    bound_rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let q = query(censor_time, delta, n_star, mode, level, bound_rule)?;
    let s = &sample.0;
    let r = py.detach(|| predict::predict_bayesian(s, &q, &quad())).map_err(to_py)?;
    report_dict(py, &r)
}

#[pymodule]
mod mobwds_py {
    #[pymodule_export]
    use super::{fit_mle, generate, mh_sample, predict_bayesian, predict_plugin, PyDataset, PyParams, PySample};
}
