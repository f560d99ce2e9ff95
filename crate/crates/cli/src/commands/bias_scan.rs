use rayon::prelude::*;

use sagd_core::langevin::{estimate_scalar, ChainState, LangevinConfig};
use sagd_core::math::squared_norm;
use sagd_core::potential::GaussianPotential;
use sagd_core::RngStream;

use crate::config::KvConfig;
use crate::csvout::{Cell, CsvWriter};
use crate::{CliError, RunArgs};

pub fn run(cfg: KvConfig, args: &RunArgs) -> Result<(), CliError> {
    let dim = cfg.usize_or("dim", 2)?;
    let gamma = cfg.f64_or("gamma", 2.0)?;
    let deltas = cfg.require_f64_list("deltas")?;
    let k_delta = cfg.f64_or("k_delta", 10_000.0)?;
    let k_list = if cfg.str_or("k_list", "").is_empty() {
        None
    } else {
        Some(cfg.require_f64_list("k_list")?)
    };
    let reps = cfg.u64_or("reps", 20)?;
    let burn_in = cfg.u64_or("burn_in", 1000)?;
    cfg.finish()?;

    if dim == 0 || reps == 0 || deltas.is_empty() {
        return Err(CliError::Config(
            "dim, reps and deltas must all be nonempty/positive".into(),
        ));
    }
    let ks: Vec<u64> = match &k_list {
        Some(list) => {
            if list.len() != deltas.len() {
                return Err(CliError::Config(
                    "k_list must have the same length as deltas".into(),
                ));
            }
            list.iter().map(|v| v.round() as u64).collect()
        }
        None => deltas.iter().map(|d| (k_delta / d).round() as u64).collect(),
    };

    let pot = GaussianPotential::standard(dim);
    let truth = dim as f64;
    let mut csv = CsvWriter::create(&args.out, &["delta", "k", "bias", "mse", "reps"])?;

    for (idx, (&delta, &k)) in deltas.iter().zip(&ks).enumerate() {
        let chain_cfg = LangevinConfig {
            gamma,
            delta,
            steps: k,
            burn_in,
        };
        chain_cfg.validate().map_err(CliError::from)?;
        // one substream per replication; pooled in replication order
        let errors: Vec<Result<f64, sagd_core::Error>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let stream = idx as u64 * reps + rep;
                let mut rng = RngStream::new(args.seed, stream);
                estimate_scalar(&pot, &chain_cfg, ChainState::zeros(dim), &mut rng, |s| {
                    squared_norm(&s.xi)
                })
                .map(|est| est - truth)
            })
            .collect();
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for e in errors {
            let err = e.map_err(CliError::from)?;
            sum += err;
            sum2 += err * err;
        }
        csv.row(&[
            Cell::Num(delta),
            Cell::Int(k),
            Cell::Num(sum / reps as f64),
            Cell::Num(sum2 / reps as f64),
            Cell::Int(reps),
        ])?;
    }
    csv.finish()
}
