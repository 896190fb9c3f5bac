//! Derivative-free Nelder–Mead simplex minimizer.

use serde::{Deserialize, Serialize};

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Stop when the spread of vertex values falls below this.
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Number of restarts from the converged point.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-8,
            max_iterations: 5000,
            initial_step: 0.25,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut start = x0.to_vec();
    let mut total_iterations = 0;
    let mut result = None;
    for _ in 0..=opts.restarts {
        let (x, value, iterations, converged) = run(&mut eval, &start, opts, opts.max_iterations - total_iterations.min(opts.max_iterations));
        total_iterations += iterations;
        let improved = result
            .as_ref()
            .is_none_or(|(_, best, _): &(Vec<f64>, f64, bool)| value < *best - opts.f_tol);
        start = x.clone();
        result = Some((x, value, converged));
        if !converged || !improved || total_iterations >= opts.max_iterations {
            break;
        }
    }
    let (x, value, converged) = result.expect("at least one pass runs");
    Minimum {
        x,
        value,
        iterations: total_iterations,
        evaluations,
        converged,
    }
}

fn run<E>(eval: &mut E, x0: &[f64], opts: &NelderMeadOptions, budget: usize) -> (Vec<f64>, f64, usize, bool)
where
    E: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    loop {
        // order vertices best to worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= opts.f_tol && diameter <= opts.x_tol {
            return (simplex.swap_remove(0), values[0], iterations, true);
        }
        if iterations >= budget {
            return (simplex.swap_remove(0), values[0], iterations, false);
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let best = simplex[0].clone();
            for (vj, bj) in simplex[i].iter_mut().zip(&best) {
                *vj = bj + SHRINK * (*vj - bj);
            }
            values[i] = eval(&simplex[i]);
        }
    }
}
