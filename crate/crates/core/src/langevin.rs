//! The discretized underdamped Langevin chain and its time-average
//! estimator.
//!
//! One chain step maps `(xi, rho)` to
//!
//! ```text
//! xi'  = xi + delta * rho
//! rho' = (1 - gamma*delta) * rho - delta * grad V(xi) + sqrt(2*gamma*delta) * eta
//! ```
//!
//! with `eta ~ N(0, I)`.  The gradient is evaluated at the *old* position.
//! The invariant law of the underlying diffusion factorizes as
//! `pi(xi) * N(0, I)` in the momentum, so long-run time averages of
//! `phi(xi, rho)` estimate expectations under that law, with a bias of
//! order `1/(K*delta) + delta` over `K` observed steps.

use crate::error::{Error, Result};
use crate::math::{all_finite, squared_norm};
use crate::potential::Potential;
use crate::rng::RngStream;

/// Friction used when a caller has no reason to prefer another value; the
/// diffusion is invariant for any positive friction, and 2 keeps
/// `gamma * delta < 1` loose at the step sizes the experiments use.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// Position/momentum pair of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub xi: Vec<f64>,
    pub rho: Vec<f64>,
    pub step_count: u64,
}

impl ChainState {
    pub fn new(xi: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if xi.len() != rho.len() {
            return Err(Error::DimensionMismatch {
                expected: xi.len(),
                got: rho.len(),
            });
        }
        if !all_finite(&xi) || !all_finite(&rho) {
            return Err(Error::Domain("chain state must be finite".into()));
        }
        Ok(ChainState {
            xi,
            rho,
            step_count: 0,
        })
    }

    /// State at the origin with zero momentum.
    pub fn zeros(dim: usize) -> Self {
        ChainState {
            xi: vec![0.0; dim],
            rho: vec![0.0; dim],
            step_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Step size, friction, observed steps, and burn-in of one chain run.
#[derive(Debug, Clone)]
pub struct LangevinConfig {
    pub gamma: f64,
    pub delta: f64,
    /// Number of post-burn-in steps handed to the observer.
    pub steps: u64,
    /// Discarded steps before observation starts.
    pub burn_in: u64,
}

impl LangevinConfig {
    pub fn new(delta: f64, steps: u64) -> Self {
        LangevinConfig {
            gamma: DEFAULT_GAMMA,
            delta,
            steps,
            burn_in: 0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "friction gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size delta must be positive, got {}",
                self.delta
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        // the momentum damping factor (1 - gamma*delta) must stay positive
        if !(self.gamma * self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma * delta must be < 1, got {}",
                self.gamma * self.delta
            )));
        }
        Ok(())
    }
}

// One in-place step; returns false if the new state is non-finite.
fn advance(
    xi: &mut [f64],
    rho: &mut [f64],
    grad: &mut [f64],
    pot: &dyn Potential,
    gamma: f64,
    delta: f64,
    noise: &[f64],
) -> bool {
    pot.gradient_into(xi, grad);
    let damping = 1.0 - gamma * delta;
    let noise_scale = (2.0 * gamma * delta).sqrt();
    let mut finite = true;
    for i in 0..xi.len() {
        xi[i] += delta * rho[i];
        rho[i] = damping * rho[i] - delta * grad[i] + noise_scale * noise[i];
        finite &= xi[i].is_finite() && rho[i].is_finite();
    }
    finite
}

/// A single chain step with explicit noise.  The gradient is evaluated at
/// the old position.
pub fn langevin_step(
    state: &ChainState,
    pot: &dyn Potential,
    cfg: &LangevinConfig,
    noise: &[f64],
) -> Result<ChainState> {
    if state.dim() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: state.dim(),
        });
    }
    if noise.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: noise.len(),
        });
    }
    if !(self::valid_step(cfg)) {
        return Err(Error::InvalidConfig(format!(
            "gamma * delta must be < 1 with gamma, delta > 0 (gamma {}, delta {})",
            cfg.gamma, cfg.delta
        )));
    }
    let mut next = state.clone();
    let mut grad = vec![0.0; state.dim()];
    let finite = advance(
        &mut next.xi,
        &mut next.rho,
        &mut grad,
        pot,
        cfg.gamma,
        cfg.delta,
        noise,
    );
    if !finite {
        return Err(Error::Diverged {
            step: state.step_count + 1,
            chain: None,
        });
    }
    next.step_count = state.step_count + 1;
    Ok(next)
}

fn valid_step(cfg: &LangevinConfig) -> bool {
    cfg.gamma > 0.0 && cfg.delta > 0.0 && cfg.gamma * cfg.delta < 1.0
}

/// Runs `burn_in` discarded steps followed by `steps` observed steps,
/// invoking the observer on every post-burn-in state.  Returns the final
/// state so a caller can keep the chain persistent.
pub fn run_chain<F>(
    pot: &dyn Potential,
    cfg: &LangevinConfig,
    init: ChainState,
    rng: &mut RngStream,
    mut observer: F,
) -> Result<ChainState>
where
    F: FnMut(&ChainState),
{
    cfg.validate()?;
    if init.dim() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: init.dim(),
        });
    }
    let mut state = init;
    let dim = state.dim();
    let mut grad = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let total = cfg.burn_in + cfg.steps;
    for k in 0..total {
        rng.fill_standard_normal(&mut noise);
        let finite = advance(
            &mut state.xi,
            &mut state.rho,
            &mut grad,
            pot,
            cfg.gamma,
            cfg.delta,
            &noise,
        );
        state.step_count += 1;
        if !finite {
            return Err(Error::Diverged {
                step: state.step_count,
                chain: None,
            });
        }
        if k >= cfg.burn_in {
            observer(&state);
        }
    }
    Ok(state)
}

/// Time-average of `phi` over the observed steps of one chain run.
/// `phi` writes its `phi_dim` components into the scratch slice; the
/// average is accumulated in a single pass with `O(phi_dim)` memory.
pub fn estimate<F>(
    pot: &dyn Potential,
    cfg: &LangevinConfig,
    init: ChainState,
    rng: &mut RngStream,
    phi_dim: usize,
    mut phi: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&ChainState, &mut [f64]),
{
    let mut sum = vec![0.0; phi_dim];
    let mut scratch = vec![0.0; phi_dim];
    run_chain(pot, cfg, init, rng, |state| {
        phi(state, &mut scratch);
        for (s, v) in sum.iter_mut().zip(&scratch) {
            *s += *v;
        }
    })?;
    let k = cfg.steps as f64;
    for s in &mut sum {
        *s /= k;
    }
    Ok(sum)
}

/// Scalar convenience wrapper around [`estimate`].
pub fn estimate_scalar<F>(
    pot: &dyn Potential,
    cfg: &LangevinConfig,
    init: ChainState,
    rng: &mut RngStream,
    mut phi: F,
) -> Result<f64>
where
    F: FnMut(&ChainState) -> f64,
{
    Ok(estimate(pot, cfg, init, rng, 1, |s, out| out[0] = phi(s))?[0])
}

/// Running diagnostic of `||xi||^(2l) + ||rho||^(2l)` along a trajectory.
///
/// A stationary chain keeps this moment flat; a transient or exploding one
/// grows it.  The chain is flagged unstable when the mean over the second
/// half of the trajectory exceeds ten times the mean over the first half.
#[derive(Debug, Clone)]
pub struct MomentDiagnostic {
    order: u32,
    values: Vec<f64>,
    max: f64,
}

impl MomentDiagnostic {
    /// `order` is the exponent `l` in `||.||^(2l)`; orders 1..=3 are
    /// supported.
    pub fn new(order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidConfig(format!(
                "moment order must be in 1..=3, got {order}"
            )));
        }
        Ok(MomentDiagnostic {
            order,
            values: Vec::new(),
            max: 0.0,
        })
    }

    pub fn observe(&mut self, state: &ChainState) {
        let v = squared_norm(&state.xi).powi(self.order as i32)
            + squared_norm(&state.rho).powi(self.order as i32);
        self.max = self.max.max(v);
        self.values.push(v);
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Means over the first and second half of the observed trajectory.
    pub fn half_means(&self) -> Option<(f64, f64)> {
        let n = self.values.len();
        if n < 2 {
            return None;
        }
        let mid = n / 2;
        let first = self.values[..mid].iter().sum::<f64>() / mid as f64;
        let second = self.values[mid..].iter().sum::<f64>() / (n - mid) as f64;
        Some((first, second))
    }

    /// False when the moment mean grew by more than 10x between the two
    /// halves of the trajectory.
    pub fn is_stable(&self) -> bool {
        match self.half_means() {
            Some((first, second)) => second <= 10.0 * first.max(f64::MIN_POSITIVE),
            None => true,
        }
    }
}
