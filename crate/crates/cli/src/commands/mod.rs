pub mod derive;
pub mod evaluate;
pub mod fit_vg;
pub mod predict;
pub mod report;
pub mod synth;
pub mod train;

use std::path::Path;

use cpxr_ptf_core::evaluation::Method;
use cpxr_ptf_core::hydrology::ConfigId;
use cpxr_ptf_core::{Dataset, ModelConfig};

use crate::error::{usage, CliResult};
use crate::exec::Parallel;
use crate::settings::Settings;
use crate::{Cli, Command};

/// State shared by every command.
pub struct Ctx {
    pub settings: Settings,
    pub seed: u64,
    pub exec: Parallel,
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(path) = &cli.settings {
        require(path)?;
    }
    let ctx = Ctx {
        settings: Settings::load(cli.settings.as_deref())?,
        seed: cli.seed.unwrap_or(0),
        exec: Parallel::new(cli.jobs.map(|j| j as usize))?,
    };
    match cli.command {
        Command::FitVg(a) => fit_vg::run(a, &ctx),
        Command::DeriveFeatures(a) => derive::run(a, &ctx),
        Command::Train(a) => train::run(a, &ctx),
        Command::Evaluate(a) => evaluate::run(a, &ctx),
        Command::Predict(a) => predict::run(a, &ctx),
        Command::Synth(a) => synth::run(a, &ctx),
        Command::Report(a) => report::run(a, &ctx),
    }
}

/// Inputs must exist before any work starts.
pub fn require(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file not found: {}", path.display())))
    }
}

pub fn parse_config(s: &str) -> Result<ConfigId, String> {
    s.parse().map_err(|e| format!("{e}; expected one of SWRC1..SWRC4, SHC1..SHC4"))
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}; expected CPXR or MLR"))
}

/// Usage error naming every configuration column the dataset lacks.
pub fn check_columns(data: &Dataset, config: &ModelConfig) -> CliResult {
    let declared = |c: &String| data.feature_names().contains(c) || data.target_names().contains(c);
    let missing: Vec<&str> =
        config.features.iter().chain(&config.targets).filter(|c| !declared(c)).map(String::as_str).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(usage(format!("{} needs columns missing from the data: {}", config.id, missing.join(", "))))
    }
}
