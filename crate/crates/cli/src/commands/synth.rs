use std::path::PathBuf;

use clap::Args;
use cpxr_ptf_core::hydrology::names;
use cpxr_ptf_core::synth::{generate, ScaleEffect};

use super::Ctx;
use crate::artifact::Provenance;
use crate::error::{usage, CliResult};
use crate::io::{num, write_retention, write_soils, write_table};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output soils CSV with features and all targets.
    #[arg(long)]
    pub out: PathBuf,
    /// Long-format noisy retention measurements.
    #[arg(long)]
    pub retention: Option<PathBuf>,
    /// Generating regime and parameters per sample.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Turn the sample-geometry effect off.
    #[arg(long)]
    pub no_scale_effect: bool,
}

pub fn run(args: SynthArgs, ctx: &Ctx) -> CliResult {
    let mut config = ctx.settings.synth.clone();
    config.seed = ctx.seed;
    if let Some(n) = args.n {
        config.n_samples = n;
    }
    if let Some(sd) = args.noise_sd {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(usage(format!("--noise-sd must be a finite non-negative number, got {sd}")));
        }
        config.noise_sd = sd;
    }
    if args.no_scale_effect {
        config.scale_effect = ScaleEffect::none();
    }
    let out = generate(&config).map_err(anyhow::Error::from)?;
    let prov = Provenance::new("synth", ctx.seed, &config)?;
    write_soils(&args.out, &prov, &out.dataset)?;
    if let Some(path) = &args.retention {
        write_retention(path, &prov, &out.retention)?;
    }
    if let Some(path) = &args.truth {
        let header = ["id", "regime", names::THETA_R, names::THETA_S, names::ALPHA, names::N, "ksat_cm_per_day"];
        let rows = out.truth.iter().map(|t| {
            let p = &t.params;
            vec![t.id.clone(), t.regime.clone(), num(p.theta_r), num(p.theta_s), num(p.alpha), num(p.n), num(t.ksat)]
        });
        write_table(path, &prov, &header.map(String::from), rows)?;
    }
    Ok(())
}
