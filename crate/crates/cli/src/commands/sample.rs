use sagd_core::langevin::{run_chain, ChainState, LangevinConfig};
use sagd_core::math::squared_norm;
use sagd_core::potential::GaussianPotential;
use sagd_core::RngStream;

use crate::config::KvConfig;
use crate::csvout::{Cell, CsvWriter};
use crate::{CliError, RunArgs};

pub fn run(cfg: KvConfig, args: &RunArgs) -> Result<(), CliError> {
    let potential_name = cfg.require_str("potential")?.to_string();
    let dim = cfg.usize_or("dim", 2)?;
    let mean = cfg.f64_or("mean", 0.0)?;
    let gamma = cfg.f64_or("gamma", 2.0)?;
    let delta = cfg.require_f64("delta")?;
    let steps = cfg.require_u64("steps")?;
    let burn_in = cfg.u64_or("burn_in", 0)?;
    let thin = cfg.u64_or("thin", 1)?;
    cfg.finish()?;

    if potential_name != "gaussian" {
        return Err(CliError::Config(format!(
            "unknown potential {potential_name:?} (supported: gaussian)"
        )));
    }
    if dim == 0 {
        return Err(CliError::Config("dim must be >= 1".into()));
    }
    if thin == 0 {
        return Err(CliError::Config("thin must be >= 1".into()));
    }
    let pot = GaussianPotential::new(vec![mean; dim]).map_err(CliError::from)?;
    let chain_cfg = LangevinConfig {
        gamma,
        delta,
        steps,
        burn_in,
    };
    chain_cfg.validate().map_err(CliError::from)?;

    let mut header: Vec<String> = vec!["kind".into(), "step".into()];
    for i in 0..dim {
        header.push(format!("xi_{i}"));
    }
    for i in 0..dim {
        header.push(format!("rho_{i}"));
    }
    header.push("xi_norm2".into());
    header.push("rho_norm2".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvWriter::create(&args.out, &header_refs)?;

    let mut rng = RngStream::new(args.seed, 0);
    let mut observed = 0u64;
    let mut sums = vec![0.0; 2 * dim + 2];
    let mut io_error: Option<CliError> = None;
    let result = run_chain(
        &pot,
        &chain_cfg,
        ChainState::zeros(dim),
        &mut rng,
        |state| {
            if io_error.is_some() {
                return;
            }
            observed += 1;
            let nx = squared_norm(&state.xi);
            let nr = squared_norm(&state.rho);
            for (i, v) in state.xi.iter().chain(&state.rho).enumerate() {
                sums[i] += v;
            }
            sums[2 * dim] += nx;
            sums[2 * dim + 1] += nr;
            if observed.is_multiple_of(thin) {
                let mut row = Vec::with_capacity(header_refs.len());
                row.push(Cell::Str("state"));
                row.push(Cell::Int(state.step_count));
                row.extend(state.xi.iter().chain(&state.rho).map(|v| Cell::Num(*v)));
                row.push(Cell::Num(nx));
                row.push(Cell::Num(nr));
                if let Err(e) = csv.row(&row) {
                    io_error = Some(e);
                }
            }
        },
    );
    if let Some(e) = io_error {
        return Err(e);
    }
    result.map_err(CliError::from)?;

    let k = steps as f64;
    let mut row = Vec::with_capacity(header_refs.len());
    row.push(Cell::Str("summary"));
    row.push(Cell::Int(steps));
    row.extend(sums.iter().map(|s| Cell::Num(s / k)));
    csv.row(&row)?;
    csv.finish()
}
