//! Stochastic approximate gradient descent (SAGD).
//!
//! This crate implements an optimizer for objectives of the form
//! `F(theta) = E[f(theta; xi)]` where `xi` follows a distribution that is
//! only known up to a normalizing constant.  Gradients are estimated by
//! time-averaging `grad f(theta; xi_k)` along a discretized underdamped
//! Langevin chain targeting `xi`'s law, so the estimates are biased for a
//! finite step size and chain length but become exact as the step size
//! shrinks and the chain grows.
//!
//! The pieces:
//!
//! * [`math`] / [`rng`] — special functions and seeded, substreamed RNG.
//! * [`potential`] — the target abstraction `V(xi) = -log pi(xi) + C` and
//!   the concrete targets used by the applications.
//! * [`langevin`] — the discretized chain, the time-average estimator, and
//!   moment diagnostics.
//! * [`optim`] — the outer optimizer: schedules, projections, and the
//!   chain-averaged gradient loop.
//! * [`em`] — an automated Monte-Carlo EM fitter for a gamma-latent model,
//!   with an exact-gradient quadrature mode for comparison.
//! * [`genmodel`] — a one-dimensional latent generator network refined
//!   against its exact posterior.
//! * [`metrics`] — Kolmogorov–Smirnov and 1-Wasserstein distances.
//! * [`oracles`] — quadrature, finite differences, and Monte-Carlo checks
//!   used by tests and the exact-gradient modes.

// `!(x > 0.0)` is used for domain checks on purpose: unlike `x <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod em;
pub mod error;
pub mod genmodel;
pub mod langevin;
pub mod math;
pub mod metrics;
pub mod optim;
pub mod oracles;
pub mod potential;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RngStream;
