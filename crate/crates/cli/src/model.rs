//! Serialized models: one fitted model per target of a configuration.

use std::path::Path;

use anyhow::Context;
use cpxr_ptf_core::cpxr::{CpxrConfig, TrainingSummary};
use cpxr_ptf_core::dataset::Sample;
use cpxr_ptf_core::evaluation::{EvaluationReport, Method, MetricSet};
use cpxr_ptf_core::{LinearModel, ModelConfig, PxrModel};
use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    #[serde(rename = "cpxr")]
    Cpxr(PxrModel),
    #[serde(rename = "mlr")]
    Mlr(LinearModel),
}

impl TrainedModel {
    pub fn features(&self) -> &[String] {
        match self {
            TrainedModel::Cpxr(m) => &m.features,
            TrainedModel::Mlr(m) => m.features(),
        }
    }

    /// `None` when the sample lacks a feature the model uses.
    pub fn predict_sample(&self, sample: &Sample) -> Option<f64> {
        match self {
            TrainedModel::Cpxr(m) => m.predict_sample(sample).ok(),
            TrainedModel::Mlr(m) => m.predict_sample(sample).ok(),
        }
    }

    pub fn patterns(&self) -> usize {
        match self {
            TrainedModel::Cpxr(m) => m.k(),
            TrainedModel::Mlr(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub target: String,
    pub log_space: bool,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub provenance: Provenance,
    pub config: ModelConfig,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpxr: Option<CpxrConfig>,
    pub rows: usize,
    pub excluded: Vec<String>,
    pub models: Vec<TargetModel>,
}

impl ModelBundle {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
    }

    /// Feature names used by any of the models, in first-use order.
    pub fn features(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in self.models.iter().flat_map(|m| m.model.features()) {
            if !out.contains(f) {
                out.push(f.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTraining {
    pub target: String,
    pub train: MetricSet,
    pub baseline_train_rmse: f64,
    pub patterns: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpxr: Option<TrainingSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub provenance: Provenance,
    pub config: String,
    pub method: Method,
    pub rows: usize,
    pub targets: Vec<TargetTraining>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub provenance: Provenance,
    pub report: EvaluationReport,
}

impl EvaluationArtifact {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing evaluation {}", path.display()))
    }
}
