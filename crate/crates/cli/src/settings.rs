use std::path::Path;

use anyhow::Context;
use cpxr_ptf_core::cpxr::CpxrConfig;
use cpxr_ptf_core::evaluation::{CvConfig, FoldScheme, R2Mode};
use cpxr_ptf_core::hydrology::{InflectionBasis, VgFitOptions, DEFAULT_TENSIONS_KPA};
use cpxr_ptf_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

/// All hyperparameters of a run. A settings file may set any subset of the
/// keys; command-line flags then override individual values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub cpxr: CpxrConfig,
    pub repetitions: usize,
    pub folds: usize,
    pub scheme: FoldScheme,
    pub r2_mode: R2Mode,
    /// Tension ladder (kPa) of the point targets.
    pub tensions_kpa: Vec<f64>,
    pub inflection: InflectionBasis,
    pub vg_fit: VgFitOptions,
    pub synth: SynthConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            cpxr: CpxrConfig::default(),
            repetitions: 10,
            folds: 10,
            scheme: FoldScheme::default(),
            r2_mode: R2Mode::default(),
            tensions_kpa: DEFAULT_TENSIONS_KPA.to_vec(),
            inflection: InflectionBasis::default(),
            vg_fit: VgFitOptions::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let settings: Settings =
            serde_json::from_str(&text).with_context(|| format!("parsing settings {}", path.display()))?;
        settings.cpxr.validate()?;
        Ok(settings)
    }

    pub fn cv(&self, seed: u64) -> CvConfig {
        CvConfig {
            repetitions: self.repetitions,
            folds: self.folds,
            scheme: self.scheme,
            seed,
            r2_mode: self.r2_mode,
            keep_predictions: true,
            cpxr: self.cpxr.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let s: Settings = serde_json::from_str(r#"{"repetitions": 3, "cpxr": {"rho": 0.5}}"#).unwrap();
        assert_eq!(s.repetitions, 3);
        assert_eq!(s.cpxr.rho, 0.5);
        assert_eq!(s.cpxr.max_k, CpxrConfig::default().max_k);
        assert_eq!(s.folds, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<Settings>(r#"{"repetition": 3}"#).is_err());
    }
}
