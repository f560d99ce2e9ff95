use sagd_core::em::{em_run, simulate_gamma_data, EmConfig, EmMode, EmRun};
use sagd_core::optim::{SagdConfig, Schedule};
use sagd_core::oracles::QuadratureSpec;
use sagd_core::RngStream;

use crate::config::KvConfig;
use crate::csvout::{Cell, CsvWriter};
use crate::{CliError, RunArgs};

pub fn run(cfg: KvConfig, args: &RunArgs) -> Result<(), CliError> {
    let n = cfg.usize_or("n", 100)?;
    let true_a = cfg.f64_or("true_a", 2.0)?;
    let true_b = cfg.f64_or("true_b", 0.5)?;
    let data_seed = cfg.u64_or("data_seed", 1)?;
    let theta0 = [cfg.f64_or("theta0_a", 0.0)?, cfg.f64_or("theta0_b", 1.0)?];
    let alpha = cfg.f64_or("alpha", 0.2)?;
    let inner_iters = cfg.u64_or("inner_iters", 100)?;
    let m_steps = cfg.u64_or("m_steps", 3)?;
    let delta_c1 = cfg.f64_or("delta_c1", 0.1)?;
    let k_c2 = cfg.f64_or("k_c2", 1.0)?;
    let k0 = cfg.u64_or("k0", 20)?;
    let burn_in = cfg.u64_or("burn_in", 100)?;
    let gamma = cfg.f64_or("gamma", 2.0)?;
    let chains = cfg.usize_or("chains", 1)?;
    let loglik_every = cfg.u64_or("loglik_every", 1)?;
    cfg.finish()?;

    if n == 0 || m_steps == 0 {
        return Err(CliError::Config("n and m_steps must be >= 1".into()));
    }

    // the data set depends only on data_seed, so --seed varies the chain
    // noise against a fixed target
    let mut data_rng = RngStream::new(data_seed, 0);
    let model = simulate_gamma_data(n, true_a, true_b, &mut data_rng);

    let make_cfg = |mode: EmMode| {
        let mut inner = SagdConfig::new(
            inner_iters.max(1),
            Schedule::convex_constant_alpha(delta_c1, k_c2, k0, alpha),
        );
        inner.gamma = gamma;
        inner.burn_in = burn_in;
        inner.chains = chains;
        inner.outer_iters = inner_iters; // zero allowed: theta stays put
        EmConfig {
            outer_steps: m_steps,
            inner,
            quad: QuadratureSpec::default(),
            mode,
            loglik_every,
        }
    };

    let sagd =
        em_run(&model, theta0, &make_cfg(EmMode::Sagd), args.seed).map_err(CliError::from)?;
    let exact =
        em_run(&model, theta0, &make_cfg(EmMode::ExactGd), args.seed).map_err(CliError::from)?;

    let mut csv = CsvWriter::create(
        &args.out,
        &[
            "mode", "update", "a", "b", "loglik", "a_exact", "b_exact", "loglik_exact",
        ],
    )?;
    let write_mode = |csv: &mut CsvWriter, name: &'static str, run: &EmRun| -> Result<(), CliError> {
        for rec in &run.path {
            csv.row(&[
                Cell::Str(name),
                Cell::Int(rec.update),
                Cell::Num(rec.theta[0]),
                Cell::Num(rec.theta[1]),
                rec.loglik.map_or(Cell::Empty, Cell::Num),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ])?;
        }
        Ok(())
    };
    write_mode(&mut csv, "sagd", &sagd)?;
    write_mode(&mut csv, "exact_gd", &exact)?;
    // summary: sagd terminals in (a, b, loglik), exact terminals in the
    // *_exact columns
    csv.row(&[
        Cell::Str("summary"),
        Cell::Int(m_steps * inner_iters),
        Cell::Num(sagd.theta_final[0]),
        Cell::Num(sagd.theta_final[1]),
        Cell::Num(*sagd.boundary_loglik.last().unwrap()),
        Cell::Num(exact.theta_final[0]),
        Cell::Num(exact.theta_final[1]),
        Cell::Num(*exact.boundary_loglik.last().unwrap()),
    ])?;
    csv.finish()
}
