use std::path::PathBuf;

use clap::Args;
use cpxr_ptf_core::hydrology::{names, vg_theta, CM_PER_KPA};
use cpxr_ptf_core::VgParameters;
use serde_json::json;

use super::{require, Ctx};
use crate::artifact::Provenance;
use crate::error::{usage, CliResult};
use crate::io::{num, opt, read_soils_checked, write_table};
use crate::model::ModelBundle;

/// Highest tension head of an emitted curve (cm), 1500 kPa.
const CURVE_MAX_CM: f64 = 1500.0 * CM_PER_KPA;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// For parametric retention models, also write θ(h) curves here.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Points per curve, log-spaced from 1 cm to 1500 kPa.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(2..))]
    pub curve_points: u32,
}

pub fn run(args: PredictArgs, ctx: &Ctx) -> CliResult {
    require(&args.model)?;
    require(&args.data)?;
    let bundle = ModelBundle::load(&args.model)?;
    let data = read_soils_checked(&args.data)?;
    let missing: Vec<String> = bundle.features().into_iter().filter(|f| !data.feature_names().contains(f)).collect();
    if !missing.is_empty() {
        return Err(usage(format!("model needs features missing from the data: {}", missing.join(", "))));
    }
    if args.curve.is_some() && !bundle.config.parametric {
        return Err(usage(format!("curves need a parametric retention model, not {}", bundle.config.id)));
    }

    let mut rows = Vec::with_capacity(data.len());
    let mut incomplete = 0;
    for sample in data.samples() {
        let values: Vec<Option<f64>> = bundle.models.iter().map(|m| m.model.predict_sample(sample)).collect();
        incomplete += usize::from(values.iter().any(Option::is_none));
        let mut row = vec![sample.id.clone()];
        row.extend(values.into_iter().map(opt));
        rows.push(row);
    }
    if incomplete > 0 {
        eprintln!("warning: {incomplete} samples lack feature values and have empty predictions");
    }
    let hashed = json!({ "model": bundle.provenance.config_hash, "curve_points": args.curve_points });
    let prov = Provenance::new("predict", ctx.seed, &hashed)?
        .with_input("model", &args.model)?
        .with_input("data", &args.data)?;
    let mut header = vec![names::ID.to_string()];
    header.extend(bundle.models.iter().map(|m| m.target.clone()));

    if let Some(curve) = &args.curve {
        let col = |name: &str| header.iter().position(|h| h == name);
        let cols = [names::THETA_R, names::THETA_S, names::LN_ALPHA, names::LN_N].map(col);
        let [Some(tr), Some(ts), Some(la), Some(ln)] = cols else {
            return Err(usage("model lacks one of theta_r, theta_s, ln_alpha, ln_n"));
        };
        let k = args.curve_points as usize;
        let mut points = Vec::new();
        for row in &rows {
            let v = |c: usize| row[c].parse::<f64>().ok();
            let (Some(r), Some(s), Some(a), Some(n)) = (v(tr), v(ts), v(la), v(ln)) else { continue };
            let params = match VgParameters::new(r, s, a.exp(), n.exp()) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("warning: sample {}: no curve, {e}", row[0]);
                    continue;
                }
            };
            for i in 0..k {
                let h = CURVE_MAX_CM.powf(i as f64 / (k - 1) as f64);
                points.push(vec![row[0].clone(), num(h), num(vg_theta(&params, h).map_err(anyhow::Error::from)?)]);
            }
        }
        write_table(curve, &prov, &["id", "tension_cm", "theta"].map(String::from), points)?;
    }
    write_table(&args.out, &prov, &header, rows)?;
    Ok(())
}
