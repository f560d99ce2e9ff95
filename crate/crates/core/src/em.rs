//! Automated Monte-Carlo EM for a gamma-latent model, with an exact
//! quadrature-gradient mode for side-by-side comparison.
//!
//! Model: latents `z_i ~ N(0,1)` i.i.d., observations
//! `x_i | z_i ~ Gamma(shape 10*sigmoid(a + b z_i))` at unit scale.  The
//! complete log-likelihood of one pair is
//!
//! ```text
//! L(theta; x, z) = -z^2/2 + (s - 1) ln x - ln Gamma(s),   s = 10 sigmoid(a + b z)
//! ```
//!
//! Each outer step fixes `theta_k`, targets the latent posterior (whose
//! negative log-density is `-L(theta_k; x, .)`), and ascends
//! `Q(theta; theta_k) = E[L(theta; x, Z) | X = x, theta_k]` for a fixed
//! number of gradient updates — either with chain-averaged gradients or
//! with the quadrature-exact gradient.
//!
//! Updates use the gradient averaged per observation (not the raw sum), so
//! step sizes do not depend on the sample size.

use crate::error::{Error, Result};
use crate::langevin::ChainState;
use crate::math::{log_gamma_raw, sigmoid, sigmoid_deriv};
use crate::optim::{approximate_gradient, ChainPool, Objective, SagdConfig, Target};
use crate::oracles::{simpson_adaptive_vec, QuadratureSpec};
use crate::potential::{GammaLatentPosterior, Potential};
use crate::rng::{mix_seed, RngStream};

/// Observed data plus the parameter pair that generated (or currently
/// describes) it.
#[derive(Debug, Clone)]
pub struct GammaLatentModel {
    pub data: Vec<f64>,
    pub theta: [f64; 2],
}

impl GammaLatentModel {
    pub fn new(data: Vec<f64>, theta: [f64; 2]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig("need at least one observation".into()));
        }
        if let Some(bad) = data.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::Domain(format!(
                "observations must be positive, got {bad}"
            )));
        }
        Ok(GammaLatentModel { data, theta })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Draws `z_i ~ N(0,1)` and `x_i ~ Gamma(10*sigmoid(a + b z_i))` at unit
/// scale.
pub fn simulate_gamma_data(n: usize, a: f64, b: f64, rng: &mut RngStream) -> GammaLatentModel {
    assert!(n >= 1);
    let data = (0..n)
        .map(|_| {
            let z = rng.standard_normal();
            rng.gamma(10.0 * sigmoid(a + b * z))
        })
        .collect();
    GammaLatentModel {
        data,
        theta: [a, b],
    }
}

/// `L(theta; x, z)` with the additive constant taken as zero.
pub fn complete_loglik(theta: [f64; 2], x: f64, z: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    let s = 10.0 * sigmoid(theta[0] + theta[1] * z);
    Ok(-z * z / 2.0 + (s - 1.0) * x.ln() - log_gamma_raw(s))
}

/// `(dL/da, dL/db)` at one `(x, z)` pair.
///
/// `dL/da = 10 sigma'(a + b z) (ln x - psi(s))` and `dL/db = z * dL/da`.
pub fn q_grad_terms(theta: [f64; 2], x: f64, z: f64) -> Result<[f64; 2]> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    Ok(q_grad_terms_raw(theta, x.ln(), z))
}

#[inline]
fn q_grad_terms_raw(theta: [f64; 2], ln_x: f64, z: f64) -> [f64; 2] {
    let y = theta[0] + theta[1] * z;
    let s = 10.0 * sigmoid(y);
    let da = 10.0 * sigmoid_deriv(y) * (ln_x - crate::math::digamma_raw(s));
    [da, z * da]
}

// Maximum of the log posterior weight over a coarse prescan, used to
// stabilize the exponentials inside posterior quadratures.
fn prescan_max<F: Fn(f64) -> f64>(f: F, quad: &QuadratureSpec) -> f64 {
    let points = 64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=points {
        let z = quad.lo + (quad.hi - quad.lo) * i as f64 / points as f64;
        best = best.max(f(z));
    }
    best
}

/// Exact gradient of `Q(theta; theta_k)`: for each observation the
/// posterior expectation of [`q_grad_terms`] under
/// `p(z | x_i, theta_k) ~ exp(L(theta_k; x_i, z))` is computed by
/// self-normalized quadrature; the result is the sum over observations.
pub fn q_gradient_exact(
    theta_k: [f64; 2],
    theta: [f64; 2],
    model: &GammaLatentModel,
    quad: &QuadratureSpec,
) -> Result<[f64; 2]> {
    let mut total = [0.0; 2];
    for (i, &x) in model.data.iter().enumerate() {
        let ln_x = x.ln();
        let log_w = |z: f64| {
            let s = 10.0 * sigmoid(theta_k[0] + theta_k[1] * z);
            -z * z / 2.0 + (s - 1.0) * ln_x - log_gamma_raw(s)
        };
        let shift = prescan_max(log_w, quad);
        let raw = simpson_adaptive_vec(
            |z, out| {
                let w = (log_w(z) - shift).exp();
                let g = q_grad_terms_raw(theta, ln_x, z);
                out[0] = w;
                out[1] = w * g[0];
                out[2] = w * g[1];
            },
            3,
            quad,
        )?;
        if raw[0] < 1e-300 {
            return Err(Error::NormalizerUnderflow { observation: i });
        }
        total[0] += raw[1] / raw[0];
        total[1] += raw[2] / raw[0];
    }
    Ok(total)
}

/// Marginal log-likelihood `sum_i ln integral exp(L(theta; x_i, z)) dz`
/// (up to the additive constant dropped from `L`).
pub fn marginal_loglik(
    theta: [f64; 2],
    model: &GammaLatentModel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, &x) in model.data.iter().enumerate() {
        let ln_x = x.ln();
        let log_f = |z: f64| {
            let s = 10.0 * sigmoid(theta[0] + theta[1] * z);
            -z * z / 2.0 + (s - 1.0) * ln_x - log_gamma_raw(s)
        };
        let shift = prescan_max(log_f, quad);
        let integral = crate::oracles::simpson_adaptive(|z| (log_f(z) - shift).exp(), quad)?;
        if integral <= 0.0 {
            return Err(Error::NormalizerUnderflow { observation: i });
        }
        total += shift + integral.ln();
    }
    Ok(total)
}

/// Which gradient feeds the inner updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmMode {
    /// Chain-averaged gradients on the latent posterior.
    Sagd,
    /// Quadrature-exact gradients (deterministic).
    ExactGd,
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Outer steps `M` (one posterior refresh each).
    pub outer_steps: u64,
    /// Inner-loop settings; `inner.outer_iters` is the number of gradient
    /// updates per outer step, and may be zero.
    pub inner: SagdConfig,
    pub quad: QuadratureSpec,
    pub mode: EmMode,
    /// Record the marginal log-likelihood every this many updates
    /// (0 disables the trace except at outer-step boundaries).
    pub loglik_every: u64,
}

/// One inner update record.
#[derive(Debug, Clone)]
pub struct EmRecord {
    /// Global update index, 1-based across outer steps.
    pub update: u64,
    pub theta: [f64; 2],
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EmRun {
    pub theta_final: [f64; 2],
    pub path: Vec<EmRecord>,
    /// Marginal log-likelihood at the start and after each outer step.
    pub boundary_loglik: Vec<f64>,
}

/// Runs `M` outer steps of the EM loop.
///
/// Per outer step `k`: the latent posterior is rebuilt at `theta_k` and
/// `T` gradient updates are applied to `theta` with the posterior held
/// fixed.  In chain mode the chains persist across updates and outer
/// steps (the previous terminal state seeds the next posterior) with
/// burn-in re-spent at every outer-step boundary because the target
/// changed.  Updates apply the step size to the per-observation mean
/// gradient.
pub fn em_run(
    model: &GammaLatentModel,
    theta0: [f64; 2],
    cfg: &EmConfig,
    seed: u64,
) -> Result<EmRun> {
    if !theta0.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("theta0 must be finite".into()));
    }
    cfg.quad.validate()?;
    let n = model.len();
    let inner_iters = cfg.inner.outer_iters;
    let mut theta = theta0;
    let mut path = Vec::new();
    let mut boundary = vec![marginal_loglik(theta, model, &cfg.quad)?];
    let mut pool: Option<ChainPool> = None;
    let mut update = 0u64;

    for m in 0..cfg.outer_steps {
        let theta_k = theta;
        match cfg.mode {
            EmMode::ExactGd => {
                for t in 1..=inner_iters {
                    let step = cfg.inner.schedule.at(t);
                    let g = q_gradient_exact(theta_k, theta, model, &cfg.quad)?;
                    theta[0] += step.alpha * g[0] / n as f64;
                    theta[1] += step.alpha * g[1] / n as f64;
                    update += 1;
                    path.push(EmRecord {
                        update,
                        theta,
                        loglik: maybe_loglik(update, cfg, theta, model)?,
                    });
                }
            }
            EmMode::Sagd => {
                let pot =
                    GammaLatentPosterior::new(model.data.clone(), theta_k[0], theta_k[1])?;
                if m == 0 && Potential::smoothness(&pot).is_none() {
                    log::warn!(
                        "latent posterior carries no smoothness bound; \
                         chain step sizes are accepted unchecked"
                    );
                }
                let log_data: Vec<f64> = model.data.iter().map(|x| x.ln()).collect();
                let obj = Objective::new(
                    2,
                    n,
                    move |th: &[f64], z: &[f64], out: &mut [f64]| {
                        // minimization form of the per-observation mean of
                        // grad_theta L
                        let mut ga = 0.0;
                        let mut gb = 0.0;
                        for (ln_x, zi) in log_data.iter().zip(z) {
                            let g = q_grad_terms_raw([th[0], th[1]], *ln_x, *zi);
                            ga += g[0];
                            gb += g[1];
                        }
                        let inv_n = 1.0 / z.len() as f64;
                        out[0] = -ga * inv_n;
                        out[1] = -gb * inv_n;
                    },
                    Target::Fixed(Box::new(pot)),
                );
                let mut chain_pool = match pool.take() {
                    Some(mut p) => {
                        p.burned_in = false; // the target changed
                        p
                    }
                    None => ChainPool::replicate(&ChainState::zeros(n), cfg.inner.chains),
                };
                let pot_ref = match obj.target() {
                    Target::Fixed(p) => p.as_ref(),
                    Target::Coupled(_) => unreachable!(),
                };
                let stage_seed = mix_seed(seed, m);
                for t in 1..=inner_iters {
                    let step = cfg.inner.schedule.at(t);
                    let g = approximate_gradient(
                        &theta,
                        &obj,
                        pot_ref,
                        step.delta,
                        step.steps,
                        cfg.inner.burn_in,
                        cfg.inner.gamma,
                        &mut chain_pool,
                        stage_seed,
                        t,
                    )?;
                    theta[0] -= step.alpha * g[0];
                    theta[1] -= step.alpha * g[1];
                    update += 1;
                    path.push(EmRecord {
                        update,
                        theta,
                        loglik: maybe_loglik(update, cfg, theta, model)?,
                    });
                }
                pool = Some(chain_pool);
            }
        }
        boundary.push(marginal_loglik(theta, model, &cfg.quad)?);
    }

    Ok(EmRun {
        theta_final: theta,
        path,
        boundary_loglik: boundary,
    })
}

fn maybe_loglik(
    update: u64,
    cfg: &EmConfig,
    theta: [f64; 2],
    model: &GammaLatentModel,
) -> Result<Option<f64>> {
    if cfg.loglik_every > 0 && update.is_multiple_of(cfg.loglik_every) {
        Ok(Some(marginal_loglik(theta, model, &cfg.quad)?))
    } else {
        Ok(None)
    }
}
