use std::path::PathBuf;

use sagd_core::genmodel::{
    sample_generator, train_debiased_observed, GeneratorFitConfig, Mlp1D,
};
use sagd_core::metrics::{ks_distance, wasserstein1, Cdf1D};
use sagd_core::optim::UpdateRule;
use sagd_core::rng::mix_seed;
use sagd_core::RngStream;

use crate::commands::{SALT_DATA, SALT_EVAL, SALT_TRAIN, SALT_WARM_START};
use crate::config::KvConfig;
use crate::csvout::{Cell, CsvWriter};
use crate::{CliError, RunArgs};

enum Latent {
    Normal { mean: f64, sd: f64 },
    Exponential { mean: f64 },
    Mixture { w1: f64, m1: f64, s1: f64, m2: f64, s2: f64 },
}

impl Latent {
    fn cdf(&self) -> Result<Cdf1D, CliError> {
        Ok(match self {
            Latent::Normal { mean, sd } => Cdf1D::normal(*mean, *sd)?,
            Latent::Exponential { mean } => Cdf1D::exponential(*mean)?,
            Latent::Mixture { w1, m1, s1, m2, s2 } => {
                Cdf1D::normal_mixture(*w1, *m1, *s1, *m2, *s2)?
            }
        })
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            Latent::Normal { mean, sd } => mean + sd * rng.standard_normal(),
            Latent::Exponential { mean } => rng.exponential(*mean),
            Latent::Mixture { w1, m1, s1, m2, s2 } => {
                if rng.uniform() < *w1 {
                    m1 + s1 * rng.standard_normal()
                } else {
                    m2 + s2 * rng.standard_normal()
                }
            }
        }
    }
}

pub fn run(cfg: KvConfig, args: &RunArgs) -> Result<(), CliError> {
    let latent = match cfg.require_str("latent")? {
        "normal" => Latent::Normal {
            mean: cfg.f64_or("latent_mean", 1.0)?,
            sd: cfg.f64_or("latent_sd", 0.5)?,
        },
        "exponential" => Latent::Exponential {
            mean: cfg.f64_or("exp_mean", 2.0)?,
        },
        "mixture" => Latent::Mixture {
            w1: cfg.f64_or("mix_weight1", 0.4)?,
            m1: cfg.f64_or("mix_mean1", 0.0)?,
            s1: cfg.f64_or("mix_sd1", 0.5)?,
            m2: cfg.f64_or("mix_mean2", 3.0)?,
            s2: cfg.f64_or("mix_sd2", 0.5)?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown latent {other:?} (supported: normal, exponential, mixture)"
            )))
        }
    };
    let n = cfg.usize_or("n", 1000)?;
    let noise_var = cfg.f64_or("noise_var", 1.0)?;
    let hidden = cfg.usize_or("hidden", 16)?;
    let epochs = cfg.u64_or("epochs", 300)?;
    let batch = cfg.usize_or("batch", 100)?;
    let alpha0 = cfg.f64_or("alpha0", 0.02)?;
    let alpha_decay = cfg.u64_or("alpha_decay", 200)?;
    let update_rule = match cfg.str_or("update", "adam") {
        "adam" => UpdateRule::adam_default(),
        "plain" => UpdateRule::Plain,
        other => {
            return Err(CliError::Config(format!(
                "unknown update rule {other:?} (supported: adam, plain)"
            )))
        }
    };
    let delta = cfg.f64_or("delta", 0.05)?;
    let chain_steps = cfg.u64_or("chain_steps", 60)?;
    let burn_in = cfg.u64_or("burn_in", 200)?;
    let gamma = cfg.f64_or("gamma", 2.0)?;
    let probe = cfg.usize_or("probe", 50)?;
    let eval_samples = cfg.usize_or("eval_samples", 100_000)?;
    let sample_out = match cfg.str_or("sample_out", "") {
        "" => {
            let mut p = args.out.as_os_str().to_owned();
            p.push(".sample.csv");
            PathBuf::from(p)
        }
        path => PathBuf::from(path),
    };
    cfg.finish()?;

    if n == 0 || eval_samples == 0 {
        return Err(CliError::Config("n and eval_samples must be >= 1".into()));
    }

    let truth = latent.cdf()?;
    let mut data_rng = RngStream::new(mix_seed(args.seed, SALT_DATA), 0);
    let data: Vec<f64> = (0..n)
        .map(|_| latent.draw(&mut data_rng) + noise_var.sqrt() * data_rng.standard_normal())
        .collect();

    let data_mean = data.iter().sum::<f64>() / n as f64;
    let data_var =
        data.iter().map(|x| (x - data_mean) * (x - data_mean)).sum::<f64>() / n as f64;
    let mut warm_rng = RngStream::new(mix_seed(args.seed, SALT_WARM_START), 0);
    let net0 = Mlp1D::warm_start(
        hidden,
        data_mean,
        (data_var - noise_var).max(0.05),
        &mut warm_rng,
    );

    let fit_cfg = GeneratorFitConfig {
        epochs,
        batch,
        alpha0,
        alpha_decay: if alpha_decay == 0 { None } else { Some(alpha_decay) },
        delta,
        chain_steps,
        burn_in,
        gamma,
        noise_var,
        update_rule,
        probe,
        ..GeneratorFitConfig::default()
    };

    let mut csv = CsvWriter::create(&args.out, &["epoch", "ks", "w1", "probe_loglik"])?;
    let eval_seed = mix_seed(args.seed, SALT_EVAL);
    let mut final_sample: Vec<f64> = Vec::new();
    let mut io_error: Option<CliError> = None;
    let result = train_debiased_observed(
        &data,
        net0,
        &fit_cfg,
        mix_seed(args.seed, SALT_TRAIN),
        |epoch, net, probe_loglik| {
            if io_error.is_some() {
                return;
            }
            let mut eval_rng = RngStream::new(eval_seed, epoch);
            let sample = sample_generator(net, eval_samples, &mut eval_rng);
            let written = (|| -> Result<(), CliError> {
                let empirical = Cdf1D::empirical(sample.clone())?;
                let ks = ks_distance(&empirical, &truth);
                let w1 = wasserstein1(&empirical, &truth);
                csv.row(&[
                    Cell::Int(epoch),
                    Cell::Num(ks),
                    Cell::Num(w1),
                    Cell::Num(probe_loglik),
                ])
            })();
            if let Err(e) = written {
                io_error = Some(e);
            }
            if epoch == epochs {
                final_sample = sample;
            }
        },
    );
    if let Some(e) = io_error {
        return Err(e);
    }
    result.map_err(CliError::from)?;
    csv.finish()?;

    // the observer fires for epoch 0 too, so even epochs = 0 leaves a sample
    let mut sample_csv = CsvWriter::create(&sample_out, &["z"])?;
    for v in &final_sample {
        sample_csv.row(&[Cell::Num(*v)])?;
    }
    sample_csv.finish()
}
