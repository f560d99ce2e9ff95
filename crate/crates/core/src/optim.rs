//! The outer optimizer: hyperparameter schedules, Euclidean projection,
//! chain-averaged approximate gradients, and the update loop.
//!
//! Each outer iteration `t` runs `K_t` chain steps at step size `delta_t`,
//! averages `grad f(theta; xi_k)` over the visited states of all chains,
//! and applies a projected (plain or Adam) update with step `alpha_t`.
//! The returned estimate is the running average of the iterates
//! `theta_1..theta_T`; the final iterate is exposed alongside it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::langevin::{run_chain, ChainState, LangevinConfig, DEFAULT_GAMMA};
use crate::math::{all_finite, norm};
use crate::potential::Potential;
use crate::rng::RngStream;

/// Closed convex feasible set for the parameter vector.
#[derive(Debug, Clone)]
pub enum Domain {
    Unconstrained,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn symmetric_box(dim: usize, half_width: f64) -> Self {
        Domain::Box {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Domain::Unconstrained => Ok(()),
            Domain::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: lower.len().min(upper.len()),
                    });
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidConfig(
                        "box domain requires lower <= upper elementwise".into(),
                    ));
                }
                Ok(())
            }
            Domain::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: center.len(),
                    });
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidConfig("ball radius must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Euclidean projection, in place.
    pub fn project_in_place(&self, theta: &mut [f64]) {
        match self {
            Domain::Unconstrained => {}
            Domain::Box { lower, upper } => {
                for ((t, l), u) in theta.iter_mut().zip(lower).zip(upper) {
                    *t = t.clamp(*l, *u);
                }
            }
            Domain::Ball { center, radius } => {
                let dist2: f64 = theta
                    .iter()
                    .zip(center)
                    .map(|(t, c)| (t - c) * (t - c))
                    .sum();
                if dist2 > radius * radius {
                    let scale = radius / dist2.sqrt();
                    for (t, c) in theta.iter_mut().zip(center) {
                        *t = c + (*t - c) * scale;
                    }
                }
            }
        }
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        self.project_in_place(&mut out);
        out
    }
}

/// Per-iteration sampling effort and step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStep {
    pub delta: f64,
    pub steps: u64,
    pub alpha: f64,
}

/// Hyperparameter sequences `(delta_t, K_t, alpha_t)`.
///
/// The convex law is `(C1/sqrt(t), ceil(C2 t) + K0, alpha0/sqrt(t))`; the
/// nonconvex law is `(C1 t^-c, ceil(C2 t^{2c}) + K0, alpha0/t)`.  The
/// convex law also admits a constant step size, which is what the
/// experiments use in practice.
#[derive(Debug, Clone)]
pub enum Schedule {
    Convex {
        c1: f64,
        c2: f64,
        k0: u64,
        alpha0: f64,
        constant_alpha: bool,
    },
    Nonconvex {
        c1: f64,
        c2: f64,
        exponent: f64,
        k0: u64,
        alpha0: f64,
    },
    Fixed {
        delta: f64,
        steps: u64,
        alpha: f64,
    },
}

impl Schedule {
    pub fn convex(c1: f64, c2: f64, k0: u64, alpha0: f64) -> Self {
        Schedule::Convex {
            c1,
            c2,
            k0,
            alpha0,
            constant_alpha: false,
        }
    }

    pub fn convex_constant_alpha(c1: f64, c2: f64, k0: u64, alpha: f64) -> Self {
        Schedule::Convex {
            c1,
            c2,
            k0,
            alpha0: alpha,
            constant_alpha: true,
        }
    }

    pub fn nonconvex(c1: f64, c2: f64, exponent: f64, k0: u64, alpha0: f64) -> Self {
        Schedule::Nonconvex {
            c1,
            c2,
            exponent,
            k0,
            alpha0,
        }
    }

    pub fn fixed(delta: f64, steps: u64, alpha: f64) -> Self {
        Schedule::Fixed {
            delta,
            steps,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Convex { c1, c2, alpha0, .. } => c1 > 0.0 && c2 > 0.0 && alpha0 >= 0.0,
            Schedule::Nonconvex {
                c1,
                c2,
                exponent,
                alpha0,
                ..
            } => c1 > 0.0 && c2 > 0.0 && exponent > 0.0 && alpha0 >= 0.0,
            Schedule::Fixed { delta, steps, alpha } => delta > 0.0 && steps >= 1 && alpha >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid schedule {self:?}")))
        }
    }

    /// Values at outer iteration `t >= 1`.
    pub fn at(&self, t: u64) -> ScheduleStep {
        assert!(t >= 1, "schedules are indexed from t = 1");
        let tf = t as f64;
        match *self {
            Schedule::Convex {
                c1,
                c2,
                k0,
                alpha0,
                constant_alpha,
            } => ScheduleStep {
                delta: c1 / tf.sqrt(),
                steps: (c2 * tf).ceil() as u64 + k0,
                alpha: if constant_alpha { alpha0 } else { alpha0 / tf.sqrt() },
            },
            Schedule::Nonconvex {
                c1,
                c2,
                exponent,
                k0,
                alpha0,
            } => ScheduleStep {
                delta: c1 * tf.powf(-exponent),
                steps: (c2 * tf.powf(2.0 * exponent)).ceil() as u64 + k0,
                alpha: alpha0 / tf,
            },
            Schedule::Fixed { delta, steps, alpha } => ScheduleStep { delta, steps, alpha },
        }
    }
}

/// `grad_f(theta, xi, out)` writing `dim_theta` components.
pub type GradFn<'a> = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'a>;
/// Builds a sampling target from the current parameter.
pub type TargetBuilder<'a> = Box<dyn Fn(&[f64]) -> Box<dyn Potential + 'a> + Send + Sync + 'a>;

/// Gradient of the integrand plus the sampling target.
///
/// `grad_f(theta, xi, out)` writes the `dim_theta` components of
/// `grad_theta f(theta; xi)`.  In fixed mode the target never changes; in
/// coupled mode it is rebuilt from the current parameter before each
/// sampling phase (used by the posterior-refinement application, which has
/// no convergence guarantee from the fixed-target theory).
pub struct Objective<'a> {
    dim_theta: usize,
    dim_xi: usize,
    grad_f: GradFn<'a>,
    target: Target<'a>,
}

pub enum Target<'a> {
    Fixed(Box<dyn Potential + 'a>),
    Coupled(TargetBuilder<'a>),
}

impl<'a> Objective<'a> {
    pub fn new<G>(dim_theta: usize, dim_xi: usize, grad_f: G, target: Target<'a>) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'a,
    {
        Objective {
            dim_theta,
            dim_xi,
            grad_f: Box::new(grad_f),
            target,
        }
    }

    pub fn fixed<G, P>(dim_theta: usize, pot: P, grad_f: G) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'a,
        P: Potential + 'a,
    {
        let dim_xi = pot.dim();
        Objective::new(dim_theta, dim_xi, grad_f, Target::Fixed(Box::new(pot)))
    }

    pub fn dim_theta(&self) -> usize {
        self.dim_theta
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn grad_into(&self, theta: &[f64], xi: &[f64], out: &mut [f64]) {
        (self.grad_f)(theta, xi, out)
    }

    pub fn target(&self) -> &Target<'a> {
        &self.target
    }
}

/// Parameter update rule for the outer loop.
#[derive(Debug, Clone, Copy)]
pub enum UpdateRule {
    Plain,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl UpdateRule {
    pub fn adam_default() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if let UpdateRule::Adam { beta1, beta2, epsilon } = *self {
            if !(0.0..1.0).contains(&beta1)
                || !(0.0..1.0).contains(&beta2)
                || !(epsilon > 0.0)
            {
                return Err(Error::InvalidConfig(
                    "adam requires beta1, beta2 in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// First/second moment state of the Adam rule.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// One Adam step (descent direction `grad`), with bias-corrected moments
/// and projection applied after the parameter move.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    dom: &Domain,
) {
    debug_assert_eq!(theta.len(), grad.len());
    state.steps += 1;
    let t = state.steps as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for i in 0..theta.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] -= alpha * m_hat / (v_hat.sqrt() + epsilon);
    }
    dom.project_in_place(theta);
}

/// Outer-loop configuration.
#[derive(Debug, Clone)]
pub struct SagdConfig {
    /// Outer iterations `T`.
    pub outer_iters: u64,
    pub schedule: Schedule,
    pub gamma: f64,
    /// Chain burn-in; with persistent chains it applies only once.
    pub burn_in: u64,
    /// Parallel chains pooled with equal weight.
    pub chains: usize,
    /// Carry chain states across outer iterations instead of restarting.
    pub persistent: bool,
    pub update_rule: UpdateRule,
    /// Return the average of `theta_1..theta_T` (otherwise `theta_T`).
    pub return_average: bool,
}

impl SagdConfig {
    pub fn new(outer_iters: u64, schedule: Schedule) -> Self {
        SagdConfig {
            outer_iters,
            schedule,
            gamma: DEFAULT_GAMMA,
            burn_in: 0,
            chains: 1,
            persistent: true,
            update_rule: UpdateRule::Plain,
            return_average: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::InvalidConfig("outer_iters must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be >= 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig("gamma must be positive".into()));
        }
        self.schedule.validate()?;
        self.update_rule.validate()
    }
}

/// Persistent chain states pooled by [`approximate_gradient`].
#[derive(Debug, Clone)]
pub struct ChainPool {
    pub states: Vec<ChainState>,
    /// Set once burn-in has been spent; persistent callers keep it set.
    pub burned_in: bool,
}

impl ChainPool {
    pub fn replicate(init: &ChainState, chains: usize) -> Self {
        ChainPool {
            states: vec![init.clone(); chains.max(1)],
            burned_in: false,
        }
    }
}

/// Chain-averaged gradient estimate
/// `g~(theta) = (1/(C*K)) sum_c sum_k grad f(theta; xi_{c,k})`.
///
/// Chains advance in parallel, each on substream
/// `outer_t * chains + chain`, and are pooled in chain order so the result
/// is independent of scheduling.  Chain states are advanced in place,
/// which is what makes persistent mode work.
#[allow(clippy::too_many_arguments)]
pub fn approximate_gradient(
    theta: &[f64],
    obj: &Objective,
    pot: &dyn Potential,
    delta: f64,
    steps: u64,
    burn_in: u64,
    gamma: f64,
    pool: &mut ChainPool,
    seed: u64,
    outer_t: u64,
) -> Result<Vec<f64>> {
    let chains = pool.states.len();
    let cfg = LangevinConfig {
        gamma,
        delta,
        steps,
        burn_in: if pool.burned_in { 0 } else { burn_in },
    };
    cfg.validate()?;
    let dim_theta = obj.dim_theta();
    let per_chain: Vec<Result<Vec<f64>>> = pool
        .states
        .par_iter_mut()
        .enumerate()
        .map(|(c, state)| {
            let stream = outer_t
                .wrapping_mul(chains as u64)
                .wrapping_add(c as u64);
            let mut rng = RngStream::new(seed, stream);
            let mut sum = vec![0.0; dim_theta];
            let mut buf = vec![0.0; dim_theta];
            match run_chain(pot, &cfg, state.clone(), &mut rng, |s| {
                obj.grad_into(theta, &s.xi, &mut buf);
                for (a, b) in sum.iter_mut().zip(&buf) {
                    *a += *b;
                }
            }) {
                Ok(final_state) => {
                    *state = final_state;
                    Ok(sum)
                }
                Err(Error::Diverged { step, .. }) => Err(Error::Diverged {
                    step,
                    chain: Some(c),
                }),
                Err(e) => Err(e),
            }
        })
        .collect();
    pool.burned_in = true;
    let mut total = vec![0.0; dim_theta];
    for result in per_chain {
        let sum = result?;
        for (t, v) in total.iter_mut().zip(&sum) {
            *t += *v;
        }
    }
    let scale = 1.0 / (chains as f64 * steps as f64);
    for t in &mut total {
        *t *= scale;
    }
    Ok(total)
}

/// One outer-iteration record.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: u64,
    /// Iterate after the update of iteration `t`.
    pub theta: Vec<f64>,
    pub delta: f64,
    pub steps: u64,
    pub alpha: f64,
    pub grad_norm: f64,
}

/// Result of an optimizer run.
#[derive(Debug, Clone)]
pub struct SagdRun {
    /// Average of `theta_1..theta_T`, or `theta_T` when averaging is off.
    pub theta_hat: Vec<f64>,
    pub theta_final: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// A run aborted by chain divergence; carries the trajectory up to the
/// failing iteration.
#[derive(Debug)]
pub struct SagdAborted {
    pub cause: Error,
    pub iteration: u64,
    pub partial: Vec<TrajectoryPoint>,
}

impl std::fmt::Display for SagdAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "aborted at outer iteration {}: {}", self.iteration, self.cause)
    }
}

impl std::error::Error for SagdAborted {}

impl From<SagdAborted> for Error {
    fn from(a: SagdAborted) -> Error {
        a.cause
    }
}

/// Runs the full optimizer.
///
/// `theta0` is projected onto the domain first.  `xi0`/`rho0` seed every
/// chain; with `persistent` off, chains restart from them (and re-burn-in)
/// at every outer iteration.
pub fn sagd_run(
    obj: &Objective,
    dom: &Domain,
    cfg: &SagdConfig,
    theta0: &[f64],
    xi0: &[f64],
    rho0: &[f64],
    seed: u64,
) -> std::result::Result<SagdRun, SagdAborted> {
    let abort_config = |e: Error| SagdAborted {
        cause: e,
        iteration: 0,
        partial: Vec::new(),
    };
    cfg.validate().map_err(abort_config)?;
    dom.validate(obj.dim_theta()).map_err(abort_config)?;
    if theta0.len() != obj.dim_theta() {
        return Err(abort_config(Error::DimensionMismatch {
            expected: obj.dim_theta(),
            got: theta0.len(),
        }));
    }
    if !all_finite(theta0) {
        return Err(abort_config(Error::Domain("theta0 must be finite".into())));
    }
    let init = ChainState::new(xi0.to_vec(), rho0.to_vec()).map_err(abort_config)?;
    if init.dim() != obj.dim_xi() {
        return Err(abort_config(Error::DimensionMismatch {
            expected: obj.dim_xi(),
            got: init.dim(),
        }));
    }

    let mut theta = dom.project(theta0);
    let p = theta.len();
    let mut pool = ChainPool::replicate(&init, cfg.chains);
    let mut adam = AdamState::new(p);
    let mut avg = vec![0.0; p];
    let mut trajectory: Vec<TrajectoryPoint> = Vec::with_capacity(cfg.outer_iters as usize);
    let mut warned_smoothness = false;

    for t in 1..=cfg.outer_iters {
        let step = cfg.schedule.at(t);
        if !cfg.persistent {
            pool = ChainPool::replicate(&init, cfg.chains);
        }
        // coupled targets are rebuilt from the current iterate
        let owned;
        let pot: &dyn Potential = match obj.target() {
            Target::Fixed(p) => p.as_ref(),
            Target::Coupled(build) => {
                owned = build(&theta);
                owned.as_ref()
            }
        };
        if !warned_smoothness && pot.smoothness().is_none() {
            log::warn!(
                "target potential carries no smoothness bound; \
                 step size delta = {} is accepted unchecked",
                step.delta
            );
            warned_smoothness = true;
        }
        let grad = match approximate_gradient(
            &theta, obj, pot, step.delta, step.steps, cfg.burn_in, cfg.gamma, &mut pool, seed, t,
        ) {
            Ok(g) => g,
            Err(cause) => {
                return Err(SagdAborted {
                    cause,
                    iteration: t,
                    partial: trajectory,
                })
            }
        };
        match cfg.update_rule {
            UpdateRule::Plain => {
                for (th, g) in theta.iter_mut().zip(&grad) {
                    *th -= step.alpha * g;
                }
                dom.project_in_place(&mut theta);
            }
            UpdateRule::Adam { beta1, beta2, epsilon } => {
                adam_update(&mut theta, &grad, &mut adam, step.alpha, beta1, beta2, epsilon, dom);
            }
        }
        for (a, th) in avg.iter_mut().zip(&theta) {
            *a += *th;
        }
        trajectory.push(TrajectoryPoint {
            t,
            theta: theta.clone(),
            delta: step.delta,
            steps: step.steps,
            alpha: step.alpha,
            grad_norm: norm(&grad),
        });
    }

    let theta_hat = if cfg.return_average {
        avg.iter().map(|a| a / cfg.outer_iters as f64).collect()
    } else {
        theta.clone()
    };
    Ok(SagdRun {
        theta_hat,
        theta_final: theta,
        trajectory,
    })
}

/// Projected gradient descent with an exactly evaluated gradient: the same
/// update, projection, and averaging path as [`sagd_run`], with
/// `grad(t, theta, out)` supplying the gradient directly.  Used by the
/// exact-gradient EM mode and as the oracle in equivalence tests.
pub fn projected_gd<G, A>(
    mut grad: G,
    dom: &Domain,
    theta0: &[f64],
    iters: u64,
    alpha_at: A,
    update_rule: &UpdateRule,
    return_average: bool,
) -> Result<SagdRun>
where
    G: FnMut(u64, &[f64], &mut [f64]) -> Result<()>,
    A: Fn(u64) -> f64,
{
    update_rule.validate()?;
    dom.validate(theta0.len())?;
    let mut theta = dom.project(theta0);
    let p = theta.len();
    let mut adam = AdamState::new(p);
    let mut avg = vec![0.0; p];
    let mut g = vec![0.0; p];
    let mut trajectory = Vec::with_capacity(iters as usize);
    for t in 1..=iters {
        grad(t, &theta, &mut g)?;
        let alpha = alpha_at(t);
        match *update_rule {
            UpdateRule::Plain => {
                for (th, gi) in theta.iter_mut().zip(&g) {
                    *th -= alpha * gi;
                }
                dom.project_in_place(&mut theta);
            }
            UpdateRule::Adam { beta1, beta2, epsilon } => {
                adam_update(&mut theta, &g, &mut adam, alpha, beta1, beta2, epsilon, dom);
            }
        }
        for (a, th) in avg.iter_mut().zip(&theta) {
            *a += *th;
        }
        trajectory.push(TrajectoryPoint {
            t,
            theta: theta.clone(),
            delta: 0.0,
            steps: 0,
            alpha,
            grad_norm: norm(&g),
        });
    }
    let theta_hat = if return_average && iters > 0 {
        avg.iter().map(|a| a / iters as f64).collect()
    } else {
        theta.clone()
    };
    Ok(SagdRun {
        theta_hat,
        theta_final: theta,
        trajectory,
    })
}
