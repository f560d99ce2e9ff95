//! A one-dimensional latent generator `z = h(u)`, `u ~ N(0,1)`, fitted to
//! observations `x = z + e`, `e ~ N(0, noise_var)` by ascending the exact
//! marginal log-likelihood.
//!
//! The ascent direction is `E_{u ~ p(u|x)}[(x - h(u))/noise_var * dh/dtheta]`,
//! with the posterior expectation estimated by a persistent per-observation
//! Langevin chain on `V(u) = (x - h(u))^2/(2 noise_var) + u^2/2`.  The
//! `log p(u)` prior term of the ascent objective is free of the network
//! parameters, so it is dropped from the gradient while staying in `V` for
//! sampling.
//!
//! There is no encoder and no variational pretraining here: the network is
//! warm-started by moment matching (see [`Mlp1D::warm_start`]) and then
//! refined directly against the exact posterior.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::langevin::{run_chain, ChainState, LangevinConfig, DEFAULT_GAMMA};
use crate::math::{sigmoid, softplus};
use crate::optim::{adam_update, AdamState, Domain, UpdateRule};
use crate::oracles::{log_integral_exp, simpson_adaptive_vec, QuadratureSpec};
use crate::potential::GeneratorPosterior;
use crate::rng::{mix_seed, RngStream};

/// `h(u) = w2 . softplus(w1 * u + b1) + b2`: one softplus hidden layer,
/// linear output, hand-coded derivatives.
///
/// Parameter vectors are laid out `[w1, b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp1D {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Derivatives of `h` at one input: with respect to every parameter and to
/// the input itself.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    /// Layout `[w1, b1, w2, b2]`.
    pub d_params: Vec<f64>,
    pub d_input: f64,
}

impl Mlp1D {
    pub fn from_parts(w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Self {
        assert_eq!(w1.len(), b1.len());
        assert_eq!(w1.len(), w2.len());
        assert!(!w1.is_empty(), "hidden width must be >= 1");
        Mlp1D { w1, b1, w2, b2 }
    }

    /// Random network: unit-scale hidden weights, output weights shrunk by
    /// the hidden width.
    pub fn random(hidden: usize, rng: &mut RngStream) -> Self {
        let h = hidden.max(1);
        Mlp1D {
            w1: (0..h).map(|_| rng.standard_normal()).collect(),
            b1: (0..h).map(|_| rng.standard_normal() * 1.5).collect(),
            w2: (0..h).map(|_| rng.standard_normal() / h as f64).collect(),
            b2: 0.0,
        }
    }

    /// Moment-matched warm start.
    ///
    /// The hidden layer is a ramp basis: unit input weights with knots
    /// spread over the typical range of a standard-normal input, and
    /// nonnegative random output weights, so the initial map is increasing.
    /// The output layer is then affinely rescaled so that `h(U)` with
    /// `U ~ N(0,1)` has the requested mean and variance.
    pub fn warm_start(hidden: usize, target_mean: f64, target_var: f64, rng: &mut RngStream) -> Self {
        let h = hidden.max(1);
        let knots: Vec<f64> = if h == 1 {
            vec![0.0]
        } else {
            (0..h)
                .map(|j| -3.0 + 6.0 * j as f64 / (h - 1) as f64)
                .collect()
        };
        let mut net = Mlp1D {
            w1: vec![1.0; h],
            b1: knots,
            w2: (0..h).map(|_| rng.standard_normal().abs() / h as f64).collect(),
            b2: 0.0,
        };
        net.moment_match(target_mean, target_var.max(1e-6));
        net
    }

    fn moment_match(&mut self, target_mean: f64, target_var: f64) {
        // first two moments of h(U) under U ~ N(0,1), by quadrature
        let spec = QuadratureSpec::default();
        let moments = simpson_adaptive_vec(
            |u, out| {
                let w = crate::math::normal_pdf(u);
                let h = self.forward(u);
                out[0] = w * h;
                out[1] = w * h * h;
            },
            2,
            &spec,
        )
        .expect("moment quadrature converges for a softplus network");
        let mean0 = moments[0];
        let var0 = (moments[1] - mean0 * mean0).max(1e-12);
        let scale = (target_var / var0).sqrt();
        let b2_old = self.b2;
        for w in &mut self.w2 {
            *w *= scale;
        }
        self.b2 = target_mean - scale * (mean0 - b2_old);
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.len()
    }

    pub fn param_count(&self) -> usize {
        3 * self.w1.len() + 1
    }

    pub fn forward(&self, u: f64) -> f64 {
        let mut out = self.b2;
        for j in 0..self.w1.len() {
            out += self.w2[j] * softplus(self.w1[j] * u + self.b1[j]);
        }
        out
    }

    /// `(h(u), dh/du)` in one pass.
    pub fn forward_with_input_grad(&self, u: f64) -> (f64, f64) {
        let mut out = self.b2;
        let mut slope = 0.0;
        for j in 0..self.w1.len() {
            let a = self.w1[j] * u + self.b1[j];
            out += self.w2[j] * softplus(a);
            slope += self.w2[j] * sigmoid(a) * self.w1[j];
        }
        (out, slope)
    }

    pub fn input_grad(&self, u: f64) -> f64 {
        self.forward_with_input_grad(u).1
    }

    /// Writes `dh/dparams` into `out` (layout `[w1, b1, w2, b2]`) and
    /// returns `h(u)`.
    pub fn param_grads_into(&self, u: f64, out: &mut [f64]) -> f64 {
        let h = self.w1.len();
        debug_assert_eq!(out.len(), self.param_count());
        let mut value = self.b2;
        for j in 0..h {
            let a = self.w1[j] * u + self.b1[j];
            let sp = softplus(a);
            let sg = sigmoid(a);
            value += self.w2[j] * sp;
            out[j] = self.w2[j] * sg * u; // d/dw1
            out[h + j] = self.w2[j] * sg; // d/db1
            out[2 * h + j] = sp; // d/dw2
        }
        out[3 * h] = 1.0; // d/db2
        value
    }

    /// All derivatives of `h` at `u`.
    pub fn grads(&self, u: f64) -> MlpGrads {
        let mut d_params = vec![0.0; self.param_count()];
        self.param_grads_into(u, &mut d_params);
        MlpGrads {
            d_params,
            d_input: self.input_grad(u),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let h = self.w1.len();
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        debug_assert_eq!(p.len(), 3 * h + 1);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let h = self.w1.len();
        assert_eq!(params.len(), self.param_count());
        self.w1.copy_from_slice(&params[..h]);
        self.b1.copy_from_slice(&params[h..2 * h]);
        self.w2.copy_from_slice(&params[2 * h..3 * h]);
        self.b2 = params[3 * h];
    }

    /// `params += scale * direction`.
    pub fn step_params(&mut self, direction: &[f64], scale: f64) {
        let h = self.w1.len();
        assert_eq!(direction.len(), self.param_count());
        for j in 0..h {
            self.w1[j] += scale * direction[j];
            self.b1[j] += scale * direction[h + j];
            self.w2[j] += scale * direction[2 * h + j];
        }
        self.b2 += scale * direction[3 * h];
    }
}

/// Training settings for the posterior-refinement loop.
#[derive(Debug, Clone)]
pub struct GeneratorFitConfig {
    pub epochs: u64,
    /// Observations per refinement step; batches are consecutive blocks.
    pub batch: usize,
    pub alpha0: f64,
    /// When set, `alpha_k = alpha0 / (1 + k/decay)`.  The harmonic decay
    /// matters late in training: near an optimum the ascent direction is
    /// mostly chain noise, and a step size that is summable in square keeps
    /// the parameters from random-walking away.
    pub alpha_decay: Option<u64>,
    pub delta: f64,
    /// Observed chain steps per refinement step and observation.
    pub chain_steps: u64,
    /// Burn-in spent once per observation, on its first visit.
    pub burn_in: u64,
    pub gamma: f64,
    pub noise_var: f64,
    pub update_rule: UpdateRule,
    /// Size of the fixed probe subset used for the log-likelihood trace.
    pub probe: usize,
    pub quad: QuadratureSpec,
}

impl Default for GeneratorFitConfig {
    fn default() -> Self {
        GeneratorFitConfig {
            epochs: 300,
            batch: 100,
            alpha0: 0.02,
            alpha_decay: Some(200),
            delta: 0.05,
            chain_steps: 60,
            burn_in: 200,
            gamma: DEFAULT_GAMMA,
            noise_var: 1.0,
            update_rule: UpdateRule::adam_default(),
            probe: 50,
            quad: QuadratureSpec::default(),
        }
    }
}

impl GeneratorFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.chain_steps == 0 {
            return Err(Error::InvalidConfig(
                "batch and chain_steps must be >= 1".into(),
            ));
        }
        if !(self.alpha0 >= 0.0) || !(self.noise_var > 0.0) {
            return Err(Error::InvalidConfig(
                "alpha0 must be >= 0 and noise_var > 0".into(),
            ));
        }
        LangevinConfig {
            gamma: self.gamma,
            delta: self.delta,
            steps: self.chain_steps,
            burn_in: self.burn_in,
        }
        .validate()
    }

    pub fn alpha_at(&self, update: u64) -> f64 {
        match self.alpha_decay {
            Some(decay) if decay > 0 => self.alpha0 / (1.0 + update as f64 / decay as f64),
            _ => self.alpha0,
        }
    }
}

/// One persistent Langevin chain (state plus private noise stream) per
/// observation.  Storage is partitioned by observation index and never
/// shared, so batches may be processed in any order and in parallel.
#[derive(Debug, Clone)]
pub struct ObsChains {
    states: Vec<ChainState>,
    rngs: Vec<RngStream>,
    burned: Vec<bool>,
}

impl ObsChains {
    pub fn new(n: usize, seed: u64) -> Self {
        ObsChains {
            states: (0..n).map(|_| ChainState::zeros(1)).collect(),
            rngs: (0..n).map(|i| RngStream::new(seed, i as u64)).collect(),
            burned: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &ChainState {
        &self.states[i]
    }
}

/// Likelihood-ascent direction for one batch: for each observation the
/// chain advances `chain_steps` steps on its posterior, the integrand
/// `(x - h(u))/noise_var * dh/dtheta` is averaged over the visited states,
/// and per-observation averages are pooled with equal weight in
/// observation-index order (so the result is invariant to the order of
/// `batch` and to scheduling).
pub fn refine_gradient(
    net: &Mlp1D,
    data: &[f64],
    batch: &[usize],
    cfg: &GeneratorFitConfig,
    chains: &mut ObsChains,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("batch must be nonempty".into()));
    }
    cfg.validate()?;
    let mut order: Vec<usize> = batch.to_vec();
    order.sort_unstable();
    if order.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("batch contains duplicate indices".into()));
    }
    if *order.last().unwrap() >= chains.len() || chains.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: chains.len(),
        });
    }
    let p = net.param_count();

    struct ObsResult {
        index: usize,
        state: ChainState,
        rng: RngStream,
        grad: Vec<f64>,
    }

    let results: Vec<Result<ObsResult>> = order
        .par_iter()
        .map(|&i| {
            let pot = GeneratorPosterior::new(data[i], net, cfg.noise_var)?;
            let lcfg = LangevinConfig {
                gamma: cfg.gamma,
                delta: cfg.delta,
                steps: cfg.chain_steps,
                burn_in: if chains.burned[i] { 0 } else { cfg.burn_in },
            };
            let mut rng = chains.rngs[i].clone();
            let mut sum = vec![0.0; p];
            let mut buf = vec![0.0; p];
            let out = run_chain(&pot, &lcfg, chains.states[i].clone(), &mut rng, |s| {
                let h = net.param_grads_into(s.xi[0], &mut buf);
                let scale = (data[i] - h) / cfg.noise_var;
                for (a, b) in sum.iter_mut().zip(&buf) {
                    *a += scale * *b;
                }
            });
            match out {
                Ok(state) => {
                    for v in &mut sum {
                        *v /= cfg.chain_steps as f64;
                    }
                    Ok(ObsResult {
                        index: i,
                        state,
                        rng,
                        grad: sum,
                    })
                }
                Err(Error::Diverged { step, .. }) => Err(Error::Diverged {
                    step,
                    chain: Some(i),
                }),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut total = vec![0.0; p];
    for result in results {
        let r = result?;
        chains.states[r.index] = r.state;
        chains.rngs[r.index] = r.rng;
        chains.burned[r.index] = true;
        for (t, g) in total.iter_mut().zip(&r.grad) {
            *t += *g;
        }
    }
    let scale = 1.0 / order.len() as f64;
    for t in &mut total {
        *t *= scale;
    }
    Ok(total)
}

/// Marginal log-likelihood `sum_i ln integral N(x_i; h(u), noise_var) phi(u) du`
/// by quadrature.
pub fn marginal_loglik_quadrature(
    net: &Mlp1D,
    xs: &[f64],
    noise_var: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let log_norm = -0.5 * (two_pi * noise_var).ln() - 0.5 * two_pi.ln();
    let mut total = 0.0;
    for &x in xs {
        let log_integrand = |u: f64| {
            let r = x - net.forward(u);
            -r * r / (2.0 * noise_var) - u * u / 2.0
        };
        total += log_integral_exp(log_integrand, quad)? + log_norm;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: u64,
    /// Quadrature marginal log-likelihood of the fixed probe subset.
    pub probe_loglik: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub net: Mlp1D,
    pub trace: Vec<EpochStats>,
}

/// Runs the refinement loop: consecutive-block minibatches, persistent
/// per-observation chains, and plain-ascent or Adam updates.  The trace
/// starts with an epoch-0 entry for the initial network.
pub fn train_debiased(
    data: &[f64],
    net_init: Mlp1D,
    cfg: &GeneratorFitConfig,
    seed: u64,
) -> Result<TrainResult> {
    train_debiased_observed(data, net_init, cfg, seed, |_, _, _| {})
}

/// [`train_debiased`] with a per-epoch observer `(epoch, net, probe_loglik)`;
/// the observer also fires for epoch 0.
pub fn train_debiased_observed<F>(
    data: &[f64],
    net_init: Mlp1D,
    cfg: &GeneratorFitConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<TrainResult>
where
    F: FnMut(u64, &Mlp1D, f64),
{
    if data.is_empty() {
        return Err(Error::InvalidConfig("data must be nonempty".into()));
    }
    cfg.validate()?;
    let n = data.len();
    let probe = &data[..cfg.probe.min(n)];
    log::warn!(
        "generator posterior carries no smoothness bound; \
         chain step size delta = {} is accepted unchecked",
        cfg.delta
    );
    let mut net = net_init;
    let mut chains = ObsChains::new(n, mix_seed(seed, 0x6368_6169)); // "chai"
    let mut adam = AdamState::new(net.param_count());
    let mut params = net.params();
    let mut trace = Vec::with_capacity(cfg.epochs as usize + 1);
    let mut update = 0u64;

    let ll0 = marginal_loglik_quadrature(&net, probe, cfg.noise_var, &cfg.quad)?;
    trace.push(EpochStats {
        epoch: 0,
        probe_loglik: ll0,
    });
    on_epoch(0, &net, ll0);

    for epoch in 1..=cfg.epochs {
        let mut lo = 0;
        while lo < n {
            let hi = (lo + cfg.batch).min(n);
            let batch: Vec<usize> = (lo..hi).collect();
            let ascent = refine_gradient(&net, data, &batch, cfg, &mut chains)?;
            update += 1;
            let alpha = cfg.alpha_at(update);
            match cfg.update_rule {
                UpdateRule::Plain => {
                    net.step_params(&ascent, alpha);
                }
                UpdateRule::Adam { beta1, beta2, epsilon } => {
                    params.copy_from_slice(&net.params());
                    let descent: Vec<f64> = ascent.iter().map(|g| -g).collect();
                    adam_update(
                        &mut params,
                        &descent,
                        &mut adam,
                        alpha,
                        beta1,
                        beta2,
                        epsilon,
                        &Domain::Unconstrained,
                    );
                    net.set_params(&params);
                }
            }
            lo = hi;
        }
        let ll = marginal_loglik_quadrature(&net, probe, cfg.noise_var, &cfg.quad)?;
        trace.push(EpochStats {
            epoch,
            probe_loglik: ll,
        });
        on_epoch(epoch, &net, ll);
    }
    Ok(TrainResult { net, trace })
}

/// `m` draws of `h(U)` with `U ~ N(0,1)`.
pub fn sample_generator(net: &Mlp1D, m: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..m).map(|_| net.forward(rng.standard_normal())).collect()
}
