//! Independent verification utilities: adaptive Simpson quadrature, central
//! finite differences, and Monte-Carlo expectations.
//!
//! These live in the library rather than in test code because the
//! exact-gradient EM mode and the generator log-likelihood probes are
//! user-facing features built on them.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Interval, starting resolution, and convergence policy for the
/// panel-doubling Simpson rule.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    pub lo: f64,
    pub hi: f64,
    /// Initial number of panels (halved intervals); must be even and >= 2.
    pub initial_panels: usize,
    /// Stop once successive estimates differ by less than this.
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl QuadratureSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        QuadratureSpec {
            lo,
            hi,
            initial_panels: 16,
            tolerance: 1e-10,
            max_doublings: 24,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "quadrature interval must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "quadrature tolerance must be positive".into(),
            ));
        }
        if self.initial_panels < 2 || !self.initial_panels.is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "initial_panels must be even and >= 2".into(),
            ));
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    /// `[-8, 8]`: wide enough that a standard-normal prior factor leaves
    /// less than 1e-14 of its mass outside.
    fn default() -> Self {
        QuadratureSpec::new(-8.0, 8.0)
    }
}

/// Composite Simpson rule with panel doubling until two successive
/// estimates agree to the spec tolerance.  Function values are reused
/// across doublings.
pub fn simpson_adaptive<F: FnMut(f64) -> f64>(mut f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let mut n = spec.initial_panels;
    let ends = f(spec.lo) + f(spec.hi);
    let h = (spec.hi - spec.lo) / n as f64;
    let mut sum_odd = 0.0; // values at odd grid indices of the current grid
    let mut sum_even = 0.0; // values at interior even indices
    for i in 1..n {
        let v = f(spec.lo + i as f64 * h);
        if i.is_multiple_of(2) {
            sum_even += v;
        } else {
            sum_odd += v;
        }
    }
    let mut h = h;
    let mut estimate = h / 3.0 * (ends + 4.0 * sum_odd + 2.0 * sum_even);
    let mut last_change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        // old grid points become the even points of the refined grid
        sum_even += sum_odd;
        sum_odd = 0.0;
        n *= 2;
        h *= 0.5;
        for i in (1..n).step_by(2) {
            sum_odd += f(spec.lo + i as f64 * h);
        }
        let refined = h / 3.0 * (ends + 4.0 * sum_odd + 2.0 * sum_even);
        last_change = (refined - estimate).abs();
        estimate = refined;
        if last_change < spec.tolerance {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNoConvergence {
        doublings: spec.max_doublings,
        last_change,
    })
}

/// Vector-valued variant: `f(x, out)` writes `dim` components, and the
/// rule converges when every component has settled.  Lets a normalizer and
/// several moments share one set of function evaluations.
pub fn simpson_adaptive_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut buf = vec![0.0; dim];
    let mut eval = |x: f64, acc: &mut [f64], buf: &mut [f64]| {
        f(x, buf);
        for (a, b) in acc.iter_mut().zip(buf.iter()) {
            *a += *b;
        }
    };
    let mut n = spec.initial_panels;
    let mut ends = vec![0.0; dim];
    eval(spec.lo, &mut ends, &mut buf);
    eval(spec.hi, &mut ends, &mut buf);
    let mut h = (spec.hi - spec.lo) / n as f64;
    let mut sum_odd = vec![0.0; dim];
    let mut sum_even = vec![0.0; dim];
    for i in 1..n {
        let x = spec.lo + i as f64 * h;
        if i.is_multiple_of(2) {
            eval(x, &mut sum_even, &mut buf);
        } else {
            eval(x, &mut sum_odd, &mut buf);
        }
    }
    let combine = |h: f64, ends: &[f64], odd: &[f64], even: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|j| h / 3.0 * (ends[j] + 4.0 * odd[j] + 2.0 * even[j]))
            .collect()
    };
    let mut estimate = combine(h, &ends, &sum_odd, &sum_even);
    let mut last_change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        for j in 0..dim {
            sum_even[j] += sum_odd[j];
            sum_odd[j] = 0.0;
        }
        n *= 2;
        h *= 0.5;
        for i in (1..n).step_by(2) {
            eval(spec.lo + i as f64 * h, &mut sum_odd, &mut buf);
        }
        let refined = combine(h, &ends, &sum_odd, &sum_even);
        last_change = refined
            .iter()
            .zip(&estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        estimate = refined;
        if last_change < spec.tolerance {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNoConvergence {
        doublings: spec.max_doublings,
        last_change,
    })
}

/// `ln integral exp(g(x)) dx` over the spec interval, stabilized by
/// shifting `g` by its maximum over a coarse prescan so the exponential
/// neither overflows nor underflows for well-concentrated integrands.
pub fn log_integral_exp<F: Fn(f64) -> f64>(g: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let prescan = 64;
    let mut shift = f64::NEG_INFINITY;
    for i in 0..=prescan {
        let x = spec.lo + (spec.hi - spec.lo) * i as f64 / prescan as f64;
        shift = shift.max(g(x));
    }
    if !shift.is_finite() {
        return Err(Error::Domain(
            "log-integrand is not finite on the quadrature interval".into(),
        ));
    }
    let integral = simpson_adaptive(|x| (g(x) - shift).exp(), spec)?;
    if integral <= 0.0 {
        return Err(Error::NormalizerUnderflow { observation: 0 });
    }
    Ok(shift + integral.ln())
}

/// Central finite-difference gradient, one coordinate at a time.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    debug_assert!(h > 0.0);
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        point[i] = x[i] + h;
        let fp = f(&point);
        point[i] = x[i] - h;
        let fm = f(&point);
        point[i] = x[i];
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

/// Sample mean and standard error of `phi(sample)` over `m` draws.
pub fn mc_expectation<S, P>(
    mut sampler: S,
    phi: P,
    m: usize,
    rng: &mut RngStream,
) -> (f64, f64)
where
    S: FnMut(&mut RngStream) -> f64,
    P: Fn(f64) -> f64,
{
    assert!(m >= 2, "mc_expectation needs at least two draws");
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..m {
        let v = phi(sampler(rng));
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / m as f64;
    let var = (sum2 - sum * sum / m as f64) / (m as f64 - 1.0);
    (mean, (var.max(0.0) / m as f64).sqrt())
}
