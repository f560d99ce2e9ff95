//! Statistical behavior of the Langevin chain on the standard Gaussian,
//! where stationary moments are known exactly.

use rayon::prelude::*;
use sagd_core::langevin::{estimate_scalar, ChainState, LangevinConfig};
use sagd_core::potential::GaussianPotential;
use sagd_core::RngStream;

fn mean_var_estimate(delta: f64, seeds: u64, steps: u64) -> f64 {
    // average over seeds of the per-coordinate variance estimate of xi
    let pot = GaussianPotential::standard(1);
    let cfg = LangevinConfig::new(delta, steps)
        .with_gamma(2.0)
        .with_burn_in(2_000);
    let total: f64 = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = RngStream::new(1000 + seed, 0);
            estimate_scalar(&pot, &cfg, ChainState::zeros(1), &mut rng, |s| {
                s.xi[0] * s.xi[0]
            })
            .unwrap()
        })
        .sum();
    total / seeds as f64
}

#[test]
fn discretization_bias_shrinks_with_step_size() {
    // the stationary variance of xi deviates from 1 by O(delta): the
    // deviation at delta = 0.1 must exceed the deviation at delta = 0.025
    let coarse = mean_var_estimate(0.1, 20, 100_000);
    let fine = mean_var_estimate(0.025, 20, 100_000);
    let dev_coarse = (coarse - 1.0).abs();
    let dev_fine = (fine - 1.0).abs();
    assert!(
        dev_coarse > dev_fine,
        "deviation at delta=0.1 ({dev_coarse:.5}) should exceed delta=0.025 ({dev_fine:.5})"
    );
}

#[test]
fn longer_chains_cut_mean_squared_error() {
    // at fixed small delta the variance term 1/(K*delta) dominates the
    // squared bias, so K -> 10K must shrink the MSE of the ||xi||^2
    // estimate materially
    let pot = GaussianPotential::standard(2);
    let mse = |steps: u64| -> f64 {
        let cfg = LangevinConfig::new(0.025, steps)
            .with_gamma(2.0)
            .with_burn_in(2_000);
        let total: f64 = (0..30u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = RngStream::new(31_000 + rep, 0);
                let est = estimate_scalar(&pot, &cfg, ChainState::zeros(2), &mut rng, |s| {
                    sagd_core::math::squared_norm(&s.xi)
                })
                .unwrap();
                (est - 2.0) * (est - 2.0)
            })
            .sum();
        total / 30.0
    };
    let short = mse(40_000);
    let long = mse(400_000);
    assert!(
        long < short / 2.0,
        "MSE should drop with tenfold K: short {short:.2e}, long {long:.2e}"
    );
}

#[test]
fn time_average_of_position_vanishes_by_symmetry() {
    let pot = GaussianPotential::standard(2);
    let cfg = LangevinConfig::new(0.05, 200_000)
        .with_gamma(2.0)
        .with_burn_in(10_000);
    let mut rng = RngStream::new(4242, 0);
    let mut sums = [0.0f64; 2];
    sagd_core::langevin::run_chain(&pot, &cfg, ChainState::zeros(2), &mut rng, |s| {
        sums[0] += s.xi[0];
        sums[1] += s.xi[1];
    })
    .unwrap();
    for s in sums {
        let mean = s / cfg.steps as f64;
        assert!(mean.abs() <= 0.05, "per-coordinate mean {mean}");
    }
}
