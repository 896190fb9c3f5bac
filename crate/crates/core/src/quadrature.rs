//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! Nodes never touch the interval endpoints, so integrands with integrable
//! endpoint singularities (e.g. `t^(a-1)` with `a < 1` at zero) can be passed
//! directly. Semi-infinite ranges are mapped onto `(0, 1)` by `t = u / (1 - u)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and subdivision budget for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::Config(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    fn tolerance(&self, estimate: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * estimate.abs())
    }
}

/// Value and error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("integrand is not finite at {x}")))
    }
}

/// One 21-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = (fc * WGK[10]).abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, error })
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    spec.validate()?;
    let first = kronrod21(f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + 1);
    heap.push(first);
    let mut subdivisions = 1;
    while total_err > spec.tolerance(total) {
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
                tolerance: spec.tolerance(total),
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds every segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval can no longer be split in floating point
            return Err(Error::Quadrature {
                estimate: total,
                error: total_err,
                tolerance: spec.tolerance(total),
                subdivisions,
            });
        }
        let left = kronrod21(f, worst.a, mid)?;
        let right = kronrod21(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        // fresh sum guards against drift from the running updates
        if subdivisions % 32 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Estimate {
        value,
        error,
        subdivisions,
    })
}

/// Integrates `f` over the finite interval `(a, b)`.
pub fn integrate_finite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("integration bounds must satisfy a < b, got ({a}, {b})")));
    }
    adaptive(&f, a, b, spec)
}

/// Integrates `f` over `(0, inf)` through the map `t = u / (1 - u)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Estimate> {
    let mapped = |u: f64| {
        let w = 1.0 - u;
        let t = u / w;
        let v = f(t);
        // the integrand decays faster than the Jacobian grows near u = 1
        if v == 0.0 {
            0.0
        } else {
            v / (w * w)
        }
    };
    adaptive(&mapped, 0.0, 1.0, spec)
}

/// Integrates `f` over `(a, inf)` for finite `a`.
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, a: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("lower bound must be finite, got {a}")));
    }
    integrate_semi_infinite(|t| f(a + t), spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn exponential_tail_integrates_to_one() {
        let r = integrate_semi_infinite(|t| (-t).exp(), &spec()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn polynomial_on_unit_interval() {
        let r = integrate_finite(|u| 3.0 * u * u, 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert_eq!(r.subdivisions, 1);
    }

    #[test]
    fn weibull_shape_three_density_normalizes() {
        let lambda = 2.35;
        let r = integrate_semi_infinite(|t| 3.0 * lambda * t * t * (-lambda * t.powi(3)).exp(), &spec())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity_is_integrable() {
        // d/dt t^0.5 = 0.5 t^-0.5 on (0, 1)
        let r = integrate_finite(|t| 0.5 / t.sqrt(), 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tight = QuadratureSpec::new(1e-14, 1e-300, 2).unwrap();
        let err = integrate_finite(|t| 0.1 / t.powf(0.9), 0.0, 1.0, &tight).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn non_finite_integrand_is_rejected() {
        let err = integrate_finite(|_| f64::NAN, 0.0, 1.0, &spec()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn invalid_spec_and_bounds() {
        assert!(QuadratureSpec::new(0.0, 1e-10, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 1e-10, 0).is_err());
        assert!(integrate_finite(|t| t, 1.0, 1.0, &spec()).is_err());
    }
}
