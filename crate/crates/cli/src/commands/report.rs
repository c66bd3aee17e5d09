use std::path::PathBuf;

use clap::Args;
use cpxr_ptf_core::evaluation::{compare, Method};
use serde_json::json;

use super::evaluate::{summary_rows, SUMMARY_HEADER};
use super::{require, Ctx};
use crate::artifact::Provenance;
use crate::error::CliResult;
use crate::io::{num, opt, write_table};
use crate::model::EvaluationArtifact;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation JSON files written by `evaluate`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Table of mean train and test metrics per configuration, method and target.
    #[arg(long)]
    pub out: PathBuf,
    /// Pairwise comparisons of reports that share targets and differ in
    /// configuration or method.
    #[arg(long)]
    pub comparisons: Option<PathBuf>,
}

pub fn run(args: ReportArgs, ctx: &Ctx) -> CliResult {
    for p in &args.inputs {
        require(p)?;
    }
    let artifacts = args.inputs.iter().map(|p| EvaluationArtifact::load(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let reports: Vec<_> = artifacts.into_iter().map(|a| a.report).collect();
    let hashed = json!({ "inputs": args.inputs.len() });
    let mut prov = Provenance::new("report", ctx.seed, &hashed)?;
    for (i, p) in args.inputs.iter().enumerate() {
        prov = prov.with_input(&format!("evaluation{}", i + 1), p)?;
    }
    write_table(&args.out, &prov, &SUMMARY_HEADER.map(String::from), summary_rows(&reports))?;

    let mut rows = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            if (a.config == b.config) == (a.method == b.method) {
                continue;
            }
            // Reference first: MLR before CPXR, fewer inputs before more.
            let swap = if a.method != b.method { a.method == Method::Cpxr } else { a.config > b.config };
            let (a, b) = if swap { (b, a) } else { (a, b) };
            let Ok(c) = compare(a, b) else { continue };
            for t in &c.targets {
                println!("{} {} vs {} {}: {}", a.config, a.method, b.config, b.method, t.statement());
                rows.push(vec![
                    a.config.to_string(),
                    a.method.to_string(),
                    b.config.to_string(),
                    b.method.to_string(),
                    t.target.clone(),
                    num(t.rmse_a),
                    num(t.rmse_b),
                    num(t.reduction_percent),
                    opt(t.r2_a),
                    opt(t.r2_b),
                ]);
            }
        }
    }
    if let Some(path) = &args.comparisons {
        let header =
            ["config_a", "method_a", "config_b", "method_b", "target", "a", "b", "reduction_percent", "r2_a", "r2_b"];
        write_table(path, &prov, &header.map(String::from), rows)?;
    }
    Ok(())
}
