use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use cpxr_ptf_core::cpxr::train_cpxr_detailed;
use cpxr_ptf_core::dataset::select_columns;
use cpxr_ptf_core::evaluation::{metrics_with, Executor, Method};
use cpxr_ptf_core::hydrology::ConfigId;
use cpxr_ptf_core::linreg::fit_with_fallback;
use cpxr_ptf_core::ModelConfig;
use serde_json::json;

use super::{check_columns, parse_config, parse_method, require, Ctx};
use crate::artifact::{write_json, Provenance};
use crate::error::CliResult;
use crate::io::read_soils_checked;
use crate::model::{ModelBundle, TargetModel, TargetTraining, TrainedModel, TrainingReport};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Soils CSV with features and targets (see `derive-features`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model configuration, e.g. SWRC2 or SHC4.
    #[arg(long, value_parser = parse_config)]
    pub config: ConfigId,
    #[arg(long, value_parser = parse_method, default_value = "CPXR")]
    pub method: Method,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Training metrics JSON; defaults to the model path with `.metrics.json`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

pub fn run(args: TrainArgs, ctx: &Ctx) -> CliResult {
    require(&args.data)?;
    let data = read_soils_checked(&args.data)?;
    let s = &ctx.settings;
    let config = ModelConfig::with_tensions(args.config, &s.tensions_kpa);
    check_columns(&data, &config)?;
    let sel = select_columns(&data, &config).context("selecting columns")?;
    if !sel.excluded.is_empty() {
        eprintln!("{} samples excluded for missing values", sel.excluded.len());
    }

    let fits = ctx.exec.map(sel.target_names.len(), |t| -> anyhow::Result<(TargetModel, TargetTraining)> {
        let name = &sel.target_names[t];
        let y = sel.target(t);
        let log_space = config.log_space(name);
        let (model, predicted, baseline, summary) = match args.method {
            Method::Mlr => {
                let m = fit_with_fallback(&sel.x.x, &y, &sel.x.names)?;
                let p = m.predict_matrix(&sel.x.x);
                (TrainedModel::Mlr(m), p, None, None)
            }
            Method::Cpxr => {
                let (m, summary) =
                    train_cpxr_detailed(&sel.x, &y, &s.cpxr).with_context(|| format!("target {name}"))?;
                let p = m.predict_design(&sel.x)?;
                (TrainedModel::Cpxr(m), p, Some(summary.baseline_rmse), Some(summary))
            }
        };
        let train = metrics_with(&predicted, &y, log_space, s.r2_mode)?;
        let training = TargetTraining {
            target: name.clone(),
            train,
            baseline_train_rmse: baseline.unwrap_or(train.rmse),
            patterns: model.patterns(),
            cpxr: summary,
        };
        Ok((TargetModel { target: name.clone(), log_space, model }, training))
    });
    let (models, targets): (Vec<_>, Vec<_>) = fits.into_iter().collect::<anyhow::Result<Vec<_>>>()?.into_iter().unzip();

    let cpxr = (args.method == Method::Cpxr).then(|| s.cpxr.clone());
    let hashed = json!({ "config": config, "method": args.method, "cpxr": cpxr, "r2_mode": s.r2_mode });
    let prov = Provenance::new("train", ctx.seed, &hashed)?.with_input("data", &args.data)?;
    let bundle = ModelBundle {
        provenance: prov.clone(),
        config: config.clone(),
        method: args.method,
        cpxr,
        rows: sel.len(),
        excluded: sel.excluded.clone(),
        models,
    };
    write_json(&args.out, &bundle)?;
    let report = TrainingReport {
        provenance: prov,
        config: config.id.to_string(),
        method: args.method,
        rows: sel.len(),
        targets,
    };
    write_json(&args.metrics.unwrap_or_else(|| args.out.with_extension("metrics.json")), &report)?;
    for t in &report.targets {
        eprintln!(
            "{}: train RMSE {:.4} (baseline {:.4}), {} patterns",
            t.target, t.train.rmse, t.baseline_train_rmse, t.patterns
        );
    }
    Ok(())
}
