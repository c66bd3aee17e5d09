use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use cpxr_ptf_core::hydrology::{build_targets, names, point_target_names, texture_statistics, ConfigId};
use cpxr_ptf_core::{Dataset, ModelConfig};
use serde_json::json;

use super::{require, Ctx};
use crate::artifact::Provenance;
use crate::error::CliResult;
use crate::io::{read_params, read_soils, write_soils, FEATURE_COLUMNS};

/// Raw saturated conductivity column (cm/day), converted to `ln_ksat`.
pub const KSAT: &str = "ksat_cm_per_day";

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// Soils CSV with id and texture, bulk density and sample geometry.
    #[arg(long)]
    pub soils: PathBuf,
    /// Fitted retention parameters from `fit-vg`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: DeriveArgs, ctx: &Ctx) -> CliResult {
    require(&args.soils)?;
    if let Some(p) = &args.params {
        require(p)?;
    }
    let data = read_soils(&args.soils).map_err(anyhow::Error::from)?;
    data.check_texture().context("texture fractions")?;
    let params: BTreeMap<String, _> = match &args.params {
        Some(p) => read_params(p).map_err(anyhow::Error::from)?.into_iter().collect(),
        None => BTreeMap::new(),
    };
    for id in params.keys() {
        if data.get(id).is_none() {
            eprintln!("warning: parameters for unknown sample {id} ignored");
        }
    }

    let s = &ctx.settings;
    let swrc = ModelConfig::with_tensions(ConfigId::Swrc1, &s.tensions_kpa);
    let shc = ModelConfig::new(ConfigId::Shc1);
    let mut samples = Vec::with_capacity(data.len());
    for sample in data.samples() {
        let mut sample = sample.clone();
        let texture = [names::SAND, names::SILT, names::CLAY].map(|c| sample.feature(c));
        if let [Some(sa), Some(si), Some(cl)] = texture {
            if !sample.features.contains_key(names::DG) || !sample.features.contains_key(names::SIGMA_G) {
                let (dg, sg) = texture_statistics(sa, si, cl).with_context(|| format!("sample {}", sample.id))?;
                sample.features.insert(names::DG.into(), dg);
                sample.features.insert(names::SIGMA_G.into(), sg);
            }
        }
        if let Some(p) = params.get(&sample.id) {
            let targets = build_targets(&swrc, Some(p), None, &s.tensions_kpa, s.inflection)
                .with_context(|| format!("sample {}", sample.id))?;
            sample.targets.extend(targets);
            sample.targets.insert(names::THETA_R.into(), p.theta_r);
            sample.targets.insert(names::ALPHA.into(), p.alpha);
            sample.targets.insert(names::N.into(), p.n);
            sample.targets.insert(names::LN_ALPHA.into(), p.alpha.ln());
            sample.targets.insert(names::LN_N.into(), p.n.ln());
        }
        if let Some(&k) = sample.targets.get(KSAT) {
            let t = build_targets(&shc, None, Some(k), &[], s.inflection)
                .with_context(|| format!("sample {}", sample.id))?;
            sample.targets.extend(t);
        }
        samples.push(sample);
    }

    let present = |c: &str| samples.iter().any(|s| s.value(c).is_some());
    let features: Vec<String> = FEATURE_COLUMNS.iter().filter(|c| present(c)).map(|c| c.to_string()).collect();
    let mut targets: Vec<String> = point_target_names(&s.tensions_kpa);
    targets.extend(
        [names::THETA_R, names::ALPHA, names::N, names::LN_ALPHA, names::LN_N, names::LN_KSAT].map(String::from),
    );
    targets.retain(|t| present(t));
    for t in data.target_names() {
        if !targets.contains(t) {
            targets.push(t.clone());
        }
    }
    let derived = Dataset::new(samples, features, targets).context("derived table")?;

    let mut prov = Provenance::new(
        "derive-features",
        ctx.seed,
        &json!({ "tensions_kpa": s.tensions_kpa, "inflection": s.inflection }),
    )?
    .with_input("soils", &args.soils)?;
    if let Some(p) = &args.params {
        prov = prov.with_input("params", p)?;
    }
    write_soils(&args.out, &prov, &derived)?;
    Ok(())
}
