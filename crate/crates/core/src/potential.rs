//! The sampling-target abstraction `V(xi) = -log pi(xi) + C` and the
//! concrete targets used by the experiments.
//!
//! Only the gradient of `V` enters the Langevin chain, so additive
//! constants in `V` are irrelevant for sampling; values are still exposed
//! because quadrature-based likelihood evaluations and diagnostics need
//! them.  Where a lower bound of `V` is known analytically it is noted on
//! the concrete type, but no shift is applied at runtime.

use crate::error::{Error, Result};
use crate::genmodel::Mlp1D;
use crate::math::{digamma_raw, log_gamma_raw, sigmoid, sigmoid_deriv};

/// An unnormalized negative log-density with gradient.
///
/// Implementations must be pure: a potential may be evaluated concurrently
/// from many chains.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    /// `V(xi)` up to an additive constant.
    fn value(&self, xi: &[f64]) -> f64;

    /// Writes `grad V(xi)` into `out`.
    fn gradient_into(&self, xi: &[f64], out: &mut [f64]);

    /// Operator-norm bound on the Hessian of `V`, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; xi.len()];
        self.gradient_into(xi, &mut g);
        g
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, xi: &[f64]) -> f64 {
        (**self).value(xi)
    }
    fn gradient_into(&self, xi: &[f64], out: &mut [f64]) {
        (**self).gradient_into(xi, out)
    }
    fn smoothness(&self) -> Option<f64> {
        (**self).smoothness()
    }
}

/// Isotropic Gaussian target: `V(xi) = ||xi - mean||^2 / 2`, `nu = 1`.
///
/// `V >= 0` with minimum 0 at the mean.
#[derive(Debug, Clone)]
pub struct GaussianPotential {
    mean: Vec<f64>,
}

impl GaussianPotential {
    pub fn new(mean: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidConfig("dimension must be >= 1".into()));
        }
        if !crate::math::all_finite(&mean) {
            return Err(Error::Domain("gaussian mean must be finite".into()));
        }
        Ok(GaussianPotential { mean })
    }

    /// Standard Gaussian in `dim` dimensions (zero mean).
    pub fn standard(dim: usize) -> Self {
        GaussianPotential {
            mean: vec![0.0; dim.max(1)],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

impl Potential for GaussianPotential {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.mean.len());
        xi.iter()
            .zip(&self.mean)
            .map(|(x, m)| (x - m) * (x - m))
            .sum::<f64>()
            / 2.0
    }

    fn gradient_into(&self, xi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xi.len(), self.mean.len());
        for ((o, x), m) in out.iter_mut().zip(xi).zip(&self.mean) {
            *o = x - m;
        }
    }

    fn smoothness(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Posterior of the latent vector `z` in the gamma-latent model, as a
/// target over `z` in `R^n`:
///
/// `V(z) = sum_i [ z_i^2/2 - (s_i - 1) ln x_i + ln Gamma(s_i) ]` with
/// `s_i = 10 sigmoid(a + b z_i)`.  The potential is separable across
/// observations.
#[derive(Debug, Clone)]
pub struct GammaLatentPosterior {
    data: Vec<f64>,
    log_data: Vec<f64>,
    a: f64,
    b: f64,
}

impl GammaLatentPosterior {
    pub fn new(data: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig("need at least one observation".into()));
        }
        if let Some(bad) = data.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::Domain(format!(
                "gamma-latent observations must be positive, got {bad}"
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain("parameters (a, b) must be finite".into()));
        }
        let log_data = data.iter().map(|x| x.ln()).collect();
        Ok(GammaLatentPosterior {
            data,
            log_data,
            a,
            b,
        })
    }

    pub fn theta(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Single-observation contribution to `V`.
    pub fn value_scalar(&self, i: usize, z: f64) -> f64 {
        let s = 10.0 * sigmoid(self.a + self.b * z);
        z * z / 2.0 - (s - 1.0) * self.log_data[i] + log_gamma_raw(s)
    }

    /// Single-observation contribution to `dV/dz_i`.
    pub fn gradient_scalar(&self, i: usize, z: f64) -> f64 {
        let y = self.a + self.b * z;
        let s = 10.0 * sigmoid(y);
        z - 10.0 * self.b * sigmoid_deriv(y) * (self.log_data[i] - digamma_raw(s))
    }
}

impl Potential for GammaLatentPosterior {
    fn dim(&self) -> usize {
        self.data.len()
    }

    fn value(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.data.len());
        z.iter()
            .enumerate()
            .map(|(i, &zi)| self.value_scalar(i, zi))
            .sum()
    }

    fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.data.len());
        for (i, (o, &zi)) in out.iter_mut().zip(z).enumerate() {
            *o = self.gradient_scalar(i, zi);
        }
    }
}

/// Exact posterior of the generator input `u` given one observation `x`
/// under `x | u ~ N(h(u), noise_var)` and `u ~ N(0, 1)`:
///
/// `V(u) = (x - h(u))^2 / (2 noise_var) + u^2 / 2`, nonnegative by
/// construction.
#[derive(Debug, Clone)]
pub struct GeneratorPosterior<'a> {
    x: f64,
    net: &'a Mlp1D,
    noise_var: f64,
}

impl<'a> GeneratorPosterior<'a> {
    pub fn new(x: f64, net: &'a Mlp1D, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if !x.is_finite() {
            return Err(Error::Domain("observation must be finite".into()));
        }
        Ok(GeneratorPosterior { x, net, noise_var })
    }
}

impl Potential for GeneratorPosterior<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), 1);
        let r = self.x - self.net.forward(u[0]);
        r * r / (2.0 * self.noise_var) + u[0] * u[0] / 2.0
    }

    fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), 1);
        let (h, dh) = self.net.forward_with_input_grad(u[0]);
        out[0] = -(self.x - h) * dh / self.noise_var + u[0];
    }
}

/// Constants controlling chain stability: Hessian bound `nu`, dissipativity
/// pair `(alpha, beta)`, and friction `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct StabilityConstants {
    pub nu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl StabilityConstants {
    /// `C_beta = beta (2 - beta) / (8 (1 - beta))`.
    pub fn c_beta(&self) -> f64 {
        self.beta * (2.0 - self.beta) / (8.0 * (1.0 - self.beta))
    }

    /// Largest admissible chain step size:
    /// `min{ 1/gamma, gamma/(2 nu), (D + 1 - sqrt(D^2 + 1))/gamma }` with
    /// `D = gamma^4 C_beta / nu^2`.
    pub fn step_size_bound(&self) -> Result<f64> {
        if !(self.nu > 0.0) {
            return Err(Error::Domain(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Domain(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        let d = self.gamma.powi(4) * self.c_beta() / (self.nu * self.nu);
        let third = (d + 1.0 - (d * d + 1.0).sqrt()) / self.gamma;
        Ok((1.0 / self.gamma)
            .min(self.gamma / (2.0 * self.nu))
            .min(third))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::digamma;
    use crate::oracles::finite_diff_grad;
    use crate::rng::RngStream;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn check_gradient(pot: &dyn Potential, points: usize, rng: &mut RngStream, scale: f64) {
        // central differences with coordinate-scaled h
        for _ in 0..points {
            let xi: Vec<f64> = (0..pot.dim())
                .map(|_| (rng.uniform() * 2.0 - 1.0) * scale)
                .collect();
            let grad = pot.gradient(&xi);
            let fd = finite_diff_grad(|x| pot.value(x), &xi, 1e-6 * scale.max(1.0));
            for (g, f) in grad.iter().zip(&fd) {
                let denom = g.abs().max(f.abs()).max(1e-6);
                assert!(
                    (g - f).abs() / denom <= 1e-5,
                    "gradient mismatch: analytic {g}, fd {f} at {xi:?}"
                );
            }
        }
    }

    #[test]
    fn gaussian_examples() {
        let p = GaussianPotential::standard(2);
        assert_eq!(p.value(&[0.0, 0.0]), 0.0);
        assert_eq!(p.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(p.value(&[3.0, 4.0]), 12.5);
        assert_eq!(p.gradient(&[3.0, 4.0]), vec![3.0, 4.0]);
        let p = GaussianPotential::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(p.value(&[1.0, 1.0]), 0.0);
        assert_eq!(p.smoothness(), Some(1.0));
    }

    #[test]
    fn gamma_latent_value_and_gradient_at_known_point() {
        // n=1, x=1, a=0, b=1, z=0: s = 5, ln x = 0 so V = ln Gamma(5) = ln 24
        let p = GammaLatentPosterior::new(vec![1.0], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.value(&[0.0]), 24.0f64.ln(), epsilon = 1e-10);
        // dV/dz = -10 * 0.25 * (0 - psi(5))
        let expected = -10.0 * 0.25 * (0.0 - digamma(5.0).unwrap());
        assert_abs_diff_eq!(p.gradient(&[0.0])[0], expected, epsilon = 1e-10);
        // and against the finite difference of V
        let fd = finite_diff_grad(|z| p.value(z), &[0.0], 1e-6);
        assert_relative_eq!(p.gradient(&[0.0])[0], fd[0], max_relative = 1e-6);
    }

    #[test]
    fn gamma_latent_is_separable() {
        let joint = GammaLatentPosterior::new(vec![1.5, 0.7], 0.3, -0.6).unwrap();
        let first = GammaLatentPosterior::new(vec![1.5], 0.3, -0.6).unwrap();
        let second = GammaLatentPosterior::new(vec![0.7], 0.3, -0.6).unwrap();
        let z = [0.4, -1.1];
        assert_abs_diff_eq!(
            joint.value(&z),
            first.value(&z[..1]) + second.value(&z[1..]),
            epsilon = 1e-12
        );
        let g = joint.gradient(&z);
        assert_abs_diff_eq!(g[0], first.gradient(&z[..1])[0], epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], second.gradient(&z[1..])[0], epsilon = 1e-12);
    }

    #[test]
    fn gamma_latent_rejects_nonpositive_data() {
        assert!(GammaLatentPosterior::new(vec![1.0, 0.0], 0.0, 1.0).is_err());
        assert!(GammaLatentPosterior::new(vec![-2.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn generator_posterior_identity_net_examples() {
        // softplus(u) - softplus(-u) = u gives an exact identity network
        let net = Mlp1D::from_parts(vec![1.0, -1.0], vec![0.0, 0.0], vec![1.0, -1.0], 0.0);
        assert_abs_diff_eq!(net.forward(0.37), 0.37, epsilon = 1e-15);
        let p = GeneratorPosterior::new(0.0, &net, 1.0).unwrap();
        assert_abs_diff_eq!(p.value(&[0.0]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.gradient(&[0.0])[0], 0.0, epsilon = 1e-15);

        let p = GeneratorPosterior::new(2.0, &net, 1.0).unwrap();
        assert_abs_diff_eq!(p.value(&[1.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.gradient(&[1.0])[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn generator_posterior_rejects_bad_noise() {
        let net = Mlp1D::from_parts(vec![1.0], vec![0.0], vec![1.0], 0.0);
        assert!(GeneratorPosterior::new(0.0, &net, 0.0).is_err());
        assert!(GeneratorPosterior::new(0.0, &net, -1.0).is_err());
    }

    #[test]
    fn all_potentials_pass_gradient_checks() {
        let mut rng = RngStream::new(11, 0);
        let g = GaussianPotential::new(vec![0.5, -1.5, 2.0]).unwrap();
        check_gradient(&g, 100, &mut rng, 3.0);

        let data: Vec<f64> = (0..4).map(|_| rng.uniform() * 8.0 + 0.2).collect();
        let gl = GammaLatentPosterior::new(data, 1.2, 0.4).unwrap();
        check_gradient(&gl, 100, &mut rng, 3.0);

        let net = Mlp1D::random(8, &mut rng);
        let gp = GeneratorPosterior::new(1.3, &net, 0.7).unwrap();
        check_gradient(&gp, 100, &mut rng, 3.0);
    }

    #[test]
    fn step_size_bound_examples() {
        let c = StabilityConstants {
            nu: 1.0,
            beta: 0.5,
            alpha: 1.0,
            gamma: 1.0,
        };
        assert_abs_diff_eq!(c.c_beta(), 0.1875, epsilon = 1e-15);
        // re-derive: D = 0.1875, third = D + 1 - sqrt(D^2 + 1)
        let d = 0.1875f64;
        let third = d + 1.0 - (d * d + 1.0).sqrt();
        let bound = c.step_size_bound().unwrap();
        assert_abs_diff_eq!(bound, third.min(1.0).min(0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(bound, 0.17007, epsilon = 1e-5);

        let c = StabilityConstants {
            nu: 10.0,
            beta: 0.5,
            alpha: 1.0,
            gamma: 1.0,
        };
        let d = 0.1875f64 / 100.0;
        let third = d + 1.0 - (d * d + 1.0).sqrt();
        assert_abs_diff_eq!(c.step_size_bound().unwrap(), third, epsilon = 1e-15);
        assert_abs_diff_eq!(c.step_size_bound().unwrap(), 0.0018733, epsilon = 1e-7);
    }

    #[test]
    fn step_size_bound_never_exceeds_inverse_gamma_and_decreases_in_nu() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..200 {
            let gamma = 0.1 + rng.uniform() * 5.0;
            let beta = 0.05 + rng.uniform() * 0.9;
            let nu1 = 0.1 + rng.uniform() * 10.0;
            let nu2 = nu1 + rng.uniform() * 10.0;
            let b1 = StabilityConstants { nu: nu1, beta, alpha: 1.0, gamma }
                .step_size_bound()
                .unwrap();
            let b2 = StabilityConstants { nu: nu2, beta, alpha: 1.0, gamma }
                .step_size_bound()
                .unwrap();
            assert!(b1 <= 1.0 / gamma + 1e-15);
            assert!(b2 <= b1 + 1e-15, "bound must not increase in nu");
        }
    }

    #[test]
    fn step_size_bound_rejects_bad_constants() {
        let base = StabilityConstants { nu: 1.0, beta: 0.5, alpha: 1.0, gamma: 1.0 };
        assert!(StabilityConstants { nu: 0.0, ..base }.step_size_bound().is_err());
        assert!(StabilityConstants { gamma: -1.0, ..base }.step_size_bound().is_err());
        assert!(StabilityConstants { beta: 1.0, ..base }.step_size_bound().is_err());
        assert!(StabilityConstants { beta: 0.0, ..base }.step_size_bound().is_err());
    }
}
