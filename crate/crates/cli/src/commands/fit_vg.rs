use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use cpxr_ptf_core::evaluation::Executor;
use cpxr_ptf_core::hydrology::fit_vg_with;
use serde_json::json;

use super::{require, Ctx};
use crate::artifact::Provenance;
use crate::error::CliResult;
use crate::io::{num, read_retention, write_params, write_table};

#[derive(Debug, Args)]
pub struct FitVgArgs {
    /// Long-format retention CSV with columns id, tension_cm, theta.
    #[arg(long)]
    pub retention: PathBuf,
    /// Output CSV of fitted parameters.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit-quality log; defaults to the output path with a `.log.csv` extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn run(args: FitVgArgs, ctx: &Ctx) -> CliResult {
    require(&args.retention)?;
    let groups = read_retention(&args.retention).map_err(anyhow::Error::from)?;
    let opts = ctx.settings.vg_fit;
    let fits = ctx.exec.map(groups.len(), |i| fit_vg_with(&groups[i].1, &opts));
    let prov =
        Provenance::new("fit-vg", ctx.seed, &json!({ "vg_fit": opts }))?.with_input("retention", &args.retention)?;

    let mut fitted = Vec::new();
    let mut log = Vec::new();
    for ((id, points), fit) in groups.iter().zip(fits) {
        let n = points.len().to_string();
        match fit {
            Ok(p) => {
                log.push(vec![id.clone(), n, "ok".into(), num(p.fit_rmse), String::new()]);
                fitted.push((id.clone(), p));
            }
            Err(e) => {
                eprintln!("warning: sample {id}: {e}");
                log.push(vec![id.clone(), n, "failed".into(), String::new(), e.to_string()]);
            }
        }
    }
    write_params(&args.out, &prov, &fitted)?;
    let log_path = args.log.unwrap_or_else(|| args.out.with_extension("log.csv"));
    let header = ["id", "points", "status", "fit_rmse", "message"].map(String::from);
    write_table(&log_path, &prov, &header, log)?;

    let failed = groups.len() - fitted.len();
    eprintln!("fitted {} of {} samples", fitted.len(), groups.len());
    if 2 * failed > groups.len() {
        return Err(anyhow!("{failed} of {} fits failed", groups.len()).into());
    }
    Ok(())
}
