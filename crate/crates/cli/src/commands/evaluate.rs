use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use cpxr_ptf_core::evaluation::{compare, cross_validate, EvaluationReport, Method};
use cpxr_ptf_core::hydrology::ConfigId;
use cpxr_ptf_core::ModelConfig;
use serde_json::json;

use super::{check_columns, parse_config, parse_method, require, Ctx};
use crate::artifact::{write_json, Provenance};
use crate::error::CliResult;
use crate::io::{num, opt, read_soils_checked, write_table};
use crate::model::EvaluationArtifact;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_config)]
    pub config: ConfigId,
    /// Comma-separated methods; all share the same folds.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "CPXR,MLR")]
    pub methods: Vec<Method>,
    /// Repetitions of k-fold splitting.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub reps: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub folds: Option<u32>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn s(v: impl ToString) -> String {
    v.to_string()
}

pub fn run(args: EvaluateArgs, ctx: &Ctx) -> CliResult {
    require(&args.data)?;
    let data = read_soils_checked(&args.data)?;
    let mut settings = ctx.settings.clone();
    if let Some(r) = args.reps {
        settings.repetitions = r as usize;
    }
    if let Some(k) = args.folds {
        settings.folds = k as usize;
    }
    let config = ModelConfig::with_tensions(args.config, &settings.tensions_kpa);
    check_columns(&data, &config)?;
    let cv = settings.cv(ctx.seed);
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let hashed = json!({ "config": config, "methods": args.methods, "cv": cv });
    let prov = Provenance::new("evaluate", ctx.seed, &hashed)?.with_input("data", &args.data)?;
    let id = config.id;

    let mut reports = Vec::new();
    for &method in &args.methods {
        let mut report =
            cross_validate(&data, &config, method, &cv, &ctx.exec).with_context(|| format!("{id} {method}"))?;
        write_predictions(&args.out_dir.join(format!("predictions_{id}_{method}.csv")), &prov, &mut report)?;
        write_iterations(&args.out_dir.join(format!("iterations_{id}_{method}.csv")), &prov, &report)?;
        let artifact = EvaluationArtifact { provenance: prov.clone(), report };
        write_json(&args.out_dir.join(format!("evaluation_{id}_{method}.json")), &artifact)?;
        reports.push(artifact.report);
    }
    write_summary(&args.out_dir.join(format!("summary_{id}.csv")), &prov, &reports)?;

    // MLR, when present, is the reference the other methods are compared to.
    let reference = reports.iter().position(|r| r.method == Method::Mlr).unwrap_or(0);
    if reports.len() > 1 {
        let mut rows = Vec::new();
        for other in reports.iter().enumerate().filter(|&(i, _)| i != reference).map(|(_, r)| r) {
            let c = compare(&reports[reference], other).map_err(anyhow::Error::from)?;
            for t in &c.targets {
                println!("{id} {} vs {}: {}", c.method_a, c.method_b, t.statement());
                rows.push(vec![
                    s(c.method_a),
                    s(c.method_b),
                    t.target.clone(),
                    s(if t.log_space { "RMSLE" } else { "RMSE" }),
                    num(t.rmse_a),
                    num(t.rmse_b),
                    num(t.reduction_percent),
                    opt(t.r2_a),
                    opt(t.r2_b),
                ]);
            }
        }
        {
            let header = ["method_a", "method_b", "target", "metric", "a", "b", "reduction_percent", "r2_a", "r2_b"];
            write_table(&args.out_dir.join(format!("comparison_{id}.csv")), &prov, &header.map(String::from), rows)?;
        }
    }
    Ok(())
}

/// Moves the per-sample predictions out of the report into a CSV.
fn write_predictions(path: &Path, prov: &Provenance, report: &mut EvaluationReport) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for r in &mut report.records {
        for p in std::mem::take(&mut r.predictions) {
            rows.push(vec![
                s(r.index),
                s(r.repetition),
                s(r.split),
                p.id,
                p.target,
                s(p.fold),
                num(p.observed),
                num(p.predicted),
            ]);
        }
    }
    let header = ["iteration", "repetition", "split", "id", "target", "fold", "observed", "predicted"];
    write_table(path, prov, &header.map(String::from), rows)
}

fn write_iterations(path: &Path, prov: &Provenance, report: &EvaluationReport) -> anyhow::Result<()> {
    let rows = report.records.iter().flat_map(|r| {
        r.targets.iter().map(move |t| {
            vec![
                s(r.index),
                s(r.repetition),
                s(r.split),
                t.target.clone(),
                num(t.train.rmse),
                num(t.baseline_train_rmse),
                num(t.test.rmse),
                opt(t.test.r2),
                s(t.patterns),
                s(t.degraded),
            ]
        })
    });
    let header = [
        "iteration",
        "repetition",
        "split",
        "target",
        "train_rmse",
        "baseline_train_rmse",
        "test_rmse",
        "test_r2",
        "patterns",
        "degraded",
    ];
    write_table(path, prov, &header.map(String::from), rows)
}

/// Mean train and test metrics per method and target.
pub fn summary_rows(reports: &[EvaluationReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for t in &r.summary {
            rows.push(vec![
                s(r.config),
                s(r.method),
                t.target.clone(),
                num(t.train.rmse),
                opt(t.train.rmsle),
                opt(t.train.r2),
                num(t.test.rmse),
                opt(t.test.rmsle),
                opt(t.test.r2),
                s(r.iterations),
            ]);
        }
    }
    rows
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "config",
    "method",
    "target",
    "train_rmse",
    "train_rmsle",
    "train_r2",
    "test_rmse",
    "test_rmsle",
    "test_r2",
    "iterations",
];

fn write_summary(path: &Path, prov: &Provenance, reports: &[EvaluationReport]) -> anyhow::Result<()> {
    write_table(path, prov, &SUMMARY_HEADER.map(String::from), summary_rows(reports))
}
