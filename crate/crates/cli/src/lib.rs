//! File formats, provenance and the command-line pipeline around
//! `cpxr-ptf-core`.

pub mod artifact;
pub mod commands;
pub mod error;
pub mod exec;
pub mod io;
pub mod model;
pub mod settings;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::run;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cpxr-ptf", version, about = "Pattern-aided regression pedotransfer functions")]
pub struct Cli {
    /// Settings JSON with hyperparameters; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub settings: Option<PathBuf>,
    /// Random seed. Defaults to 0 when neither the flag nor the variable is set.
    #[arg(long, global = true, env = "CPXR_PTF_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit retention parameters to long-format measurements.
    FitVg(commands::fit_vg::FitVgArgs),
    /// Add texture statistics and retention/conductivity targets to a soils table.
    DeriveFeatures(commands::derive::DeriveArgs),
    /// Train one model per target of a configuration.
    Train(commands::train::TrainArgs),
    /// Repeated cross-validation of one or more methods on shared folds.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Predict targets for new samples with a trained model.
    Predict(commands::predict::PredictArgs),
    /// Generate a synthetic soils table and retention measurements.
    Synth(commands::synth::SynthArgs),
    /// Collect evaluation results into one table.
    Report(commands::report::ReportArgs),
}
