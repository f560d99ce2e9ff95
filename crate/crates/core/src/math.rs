//! Scalar special functions and small vector helpers.
//!
//! The special functions are self-contained implementations of well-known
//! approximations: a Lanczos expansion for `ln Gamma`, a shift-up recurrence
//! plus asymptotic series for `digamma`, and a series / continued-fraction
//! pair for `erf`.  Accuracy is far better than the tolerances the rest of
//! the crate needs (absolute error around 1e-13 on the ranges of interest).

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_7;

// Lanczos coefficients for g = 7, n = 9.
const LANCZOS: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const LANCZOS_BASE: f64 = 0.999_999_999_999_809_9;

fn log_gamma_lanczos(s: f64) -> f64 {
    // valid for s >= 0.5
    let z = s - 1.0;
    let mut acc = LANCZOS_BASE;
    for (i, c) in LANCZOS.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    LN_SQRT_TWO_PI + (z + 0.5) * t.ln() - t + acc.ln()
}

pub(crate) fn log_gamma_raw(s: f64) -> f64 {
    debug_assert!(s > 0.0);
    if s < 0.5 {
        // reflection keeps the Lanczos argument away from the pole
        let pi = std::f64::consts::PI;
        (pi / (pi * s).sin()).ln() - log_gamma_lanczos(1.0 - s)
    } else {
        log_gamma_lanczos(s)
    }
}

/// Natural logarithm of the gamma function, `ln Gamma(s)` for `s > 0`.
pub fn log_gamma(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("log_gamma requires s > 0, got {s}")));
    }
    Ok(log_gamma_raw(s))
}

pub(crate) fn digamma_raw(s: f64) -> f64 {
    debug_assert!(s > 0.0);
    // shift up to x >= 10, then the asymptotic series in 1/x^2
    let mut x = s;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli-number series: ln x - 1/(2x) - sum B_{2n}/(2n x^{2n})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + x.ln() - 0.5 / x - series
}

/// Digamma function `psi(s) = d/ds ln Gamma(s)` for `s > 0`.
pub fn digamma(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("digamma requires s > 0, got {s}")));
    }
    Ok(digamma_raw(s))
}

/// Logistic sigmoid `1/(1 + exp(-x))`, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the sigmoid, `sigma(x) * (1 - sigma(x))`.
pub fn sigmoid_deriv(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// Softplus `ln(1 + exp(x))`, stable for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2x e^{-x^2}/sqrt(pi) * sum_n (2x^2)^n / (2n+1)!!
    // all terms positive, good for |x| <= 3
    let xx = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 1.0;
    loop {
        term *= xx / (2.0 * n + 1.0);
        sum += term;
        n += 1.0;
        if term < sum * 1e-18 || n > 200.0 {
            break;
        }
    }
    std::f64::consts::FRAC_2_SQRT_PI * x * (-x * x).exp() * sum
}

fn erfc_cf(x: f64) -> f64 {
    // erfc(x) = e^{-x^2} / (x sqrt(pi)) * 1/(1 + q1/(1 + q2/(1 + ...))),
    // q_n = n / (2 x^2); modified Lentz evaluation, for x >= 3
    let tiny = 1e-300;
    let two_x2 = 2.0 * x * x;
    let mut f = 1.0f64;
    let mut c = f;
    let mut d = 0.0f64;
    for n in 1..=300 {
        let q = n as f64 / two_x2;
        d = 1.0 + q * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + q / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / (x * std::f64::consts::PI.sqrt()) / f
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < 3.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        1.0 - erf(x)
    } else {
        erfc_cf(x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    squared_norm(a).sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_gamma_known_values() {
        // Gamma(1) = 1, Gamma(5) = 4!, Gamma(1/2) = sqrt(pi)
        assert_abs_diff_eq!(log_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_gamma(5.0).unwrap(), 3.178053830347946, epsilon = 1e-11);
        assert_abs_diff_eq!(log_gamma(0.5).unwrap(), 0.5723649429247001, epsilon = 1e-12);
        // range endpoints
        assert_abs_diff_eq!(log_gamma(1e-3).unwrap(), 6.907178885383854, epsilon = 1e-10);
        assert_abs_diff_eq!(log_gamma(1000.0).unwrap(), 5905.220423209181, epsilon = 1e-8);
        assert_abs_diff_eq!(log_gamma(0.3).unwrap(), 1.095797994818075_5, epsilon = 1e-12);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_recurrence() {
        // ln Gamma(s+1) = ln Gamma(s) + ln s on 1000 random points in (0, 100]
        let mut rng = crate::rng::RngStream::new(42, 0);
        for _ in 0..1000 {
            let s = rng.uniform() * 100.0 + 1e-6;
            let lhs = log_gamma(s + 1.0).unwrap();
            let rhs = log_gamma(s).unwrap() + s.ln();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn digamma_known_values() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(5.0).unwrap(), 1.5061176684318005, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(0.01).unwrap(), -100.56088545786867, epsilon = 1e-8);
        assert_abs_diff_eq!(digamma(1000.0).unwrap(), 6.907255195648812, epsilon = 1e-10);
        // recurrence psi(2) = psi(1) + 1
        assert_abs_diff_eq!(
            digamma(2.0).unwrap(),
            digamma(1.0).unwrap() + 1.0,
            epsilon = 1e-12
        );
        // half-integer identity psi(1/2) = psi(1) - 2 ln 2
        assert_abs_diff_eq!(
            digamma(0.5).unwrap(),
            digamma(1.0).unwrap() - 2.0 * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn digamma_rejects_nonpositive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-3.0).is_err());
    }

    #[test]
    fn digamma_matches_central_difference_of_log_gamma() {
        // the stated oracle: central difference with h = 1e-5
        let h = 1e-5;
        let cd1 = (log_gamma(1.0 + h).unwrap() - log_gamma(1.0 - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(digamma(1.0).unwrap(), cd1, epsilon = 1e-9);
        assert_abs_diff_eq!(cd1, -0.577_215_664_901_532_9, epsilon = 1e-8);

        let mut rng = crate::rng::RngStream::new(7, 0);
        for _ in 0..200 {
            let s = 0.1 + rng.uniform() * 49.9;
            let cd = (log_gamma(s + h).unwrap() - log_gamma(s - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(digamma(s).unwrap(), cd, epsilon = 1e-6);
        }
    }

    #[test]
    fn sigmoid_softplus_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(softplus(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        // symmetry sigma(-x) = 1 - sigma(x)
        assert_abs_diff_eq!(sigmoid(-3.7), 1.0 - sigmoid(3.7), epsilon = 1e-15);
        // stability up to |x| = 700
        assert!(sigmoid(700.0).is_finite() && sigmoid(-700.0).is_finite());
        assert!(softplus(700.0).is_finite() && softplus(-700.0).is_finite());
        assert_abs_diff_eq!(softplus(700.0), 700.0, epsilon = 1e-9);
        // softplus(x) >= max(x, 0)
        for &x in &[-5.0, -0.3, 0.0, 0.3, 5.0, 123.0] {
            assert!(softplus(x) >= x.max(0.0) - 1e-12);
        }
        assert_abs_diff_eq!(sigmoid_deriv(1.3), sigmoid(1.3) * (1.0 - sigmoid(1.3)), epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid_deriv(-1.3), sigmoid_deriv(1.3), epsilon = 1e-15);
    }

    #[test]
    fn erf_known_values() {
        assert_abs_diff_eq!(erf(1.0), 0.842_700_792_949_714_9, epsilon = 1e-13);
        assert_abs_diff_eq!(erf(0.5), 0.520_499_877_813_046_5, epsilon = 1e-13);
        assert_abs_diff_eq!(erf(2.5), 0.999_593_047_982_555, epsilon = 1e-13);
        assert_abs_diff_eq!(erf(3.5), 0.999_999_256_901_627_7, epsilon = 1e-13);
        assert_abs_diff_eq!(erfc(3.0), 2.209_049_699_858_544e-5, epsilon = 1e-16);
        assert_abs_diff_eq!(erfc(6.0), 2.151_973_671_249_891_3e-17, epsilon = 1e-27);
        assert_abs_diff_eq!(erf(-1.0), -erf(1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.96), 0.975_002_104_851_779_6, epsilon = 1e-13);
        assert_abs_diff_eq!(normal_cdf(-1.0), 0.158_655_253_931_457_05, epsilon = 1e-13);
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn erf_is_continuous_at_the_branch_switch() {
        // series below x = 3, continued fraction above
        let below = erf(3.0 - 1e-9);
        let above = erf(3.0 + 1e-9);
        assert!((below - above).abs() < 1e-12, "{below} vs {above}");
        let below = erfc(3.0 - 1e-9);
        let above = erfc(3.0 + 1e-9);
        assert!((below - above).abs() < 1e-12, "{below} vs {above}");
    }

    #[test]
    fn vector_helpers() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
        assert_eq!(squared_norm(&[3.0, 4.0]), 25.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert!(all_finite(&[1.0, 2.0]));
        assert!(!all_finite(&[1.0, f64::NAN]));
        assert!(!all_finite(&[f64::INFINITY]));
    }
}
