//! Synthetic soil populations with threshold-defined regimes, each mapping
//! soil properties linearly to retention parameters and conductivity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Sample};
use crate::hydrology::{
    build_targets, names, point_target_names, texture_statistics, vg_theta, ConfigId, HydrologyError, InflectionBasis,
    ModelConfig, RetentionPoint, VgParameters, DEFAULT_TENSIONS_KPA,
};
use crate::math::{exp, ln};

pub const DIAMETERS_CM: [f64; 5] = [5.0, 8.0, 10.0, 20.0, 30.0];
pub const LENGTHS_CM: [f64; 5] = [1.0, 5.0, 10.0, 20.0, 100.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("sample {id} matches {matches} regimes")]
    InvalidPartition { id: String, matches: usize },
    #[error("noise_sd must be finite and non-negative")]
    InvalidNoise,
    #[error("regime `{regime}` gives invalid parameters for sample {id}: {source}")]
    InvalidParameters { regime: String, id: String, source: HydrologyError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Hydrology(#[from] HydrologyError),
}

/// `feature` in `[lo, hi)`; missing bounds are open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl Condition {
    pub fn holds(&self, v: f64) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v < hi)
    }
}

/// `intercept + Σ coefficient·feature`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearTerm {
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl LinearTerm {
    pub fn new(intercept: f64, coefficients: &[(&str, f64)]) -> Self {
        Self { intercept, coefficients: coefficients.iter().map(|&(k, v)| (k.to_string(), v)).collect() }
    }

    pub fn eval(&self, features: &BTreeMap<String, f64>) -> f64 {
        self.intercept + self.coefficients.iter().map(|(k, c)| c * features.get(k).copied().unwrap_or(0.0)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRule {
    pub name: String,
    /// Conjunction of conditions.
    pub conditions: Vec<Condition>,
    pub theta_r: LinearTerm,
    pub theta_s: LinearTerm,
    pub ln_alpha: LinearTerm,
    pub ln_n: LinearTerm,
    pub ln_ksat: LinearTerm,
    /// Multiplier on the scale effect for samples of this regime.
    #[serde(default = "unit")]
    pub scale_sensitivity: f64,
}

fn unit() -> f64 {
    1.0
}

impl RegimeRule {
    pub fn matches(&self, features: &BTreeMap<String, f64>) -> bool {
        self.conditions.iter().all(|c| features.get(&c.feature).is_some_and(|&v| c.holds(v)))
    }
}

/// Linear shifts by sample internal diameter and length (cm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaleEffect {
    pub ln_alpha_per_length: f64,
    pub theta_s_per_length: f64,
    pub ln_alpha_per_diameter: f64,
    pub theta_s_per_diameter: f64,
    pub ln_ksat_per_length: f64,
    pub ln_ksat_per_diameter: f64,
}

impl ScaleEffect {
    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub regimes: Vec<RegimeRule>,
    /// Standard deviation of the noise on θr, θs and on measured water contents.
    pub noise_sd: f64,
    /// Noise on ln α, ln n and ln Ksat is `log_noise_scale · noise_sd`.
    pub log_noise_scale: f64,
    pub scale_effect: ScaleEffect,
    pub seed: u64,
    /// Tension heads (cm) of the emitted retention measurements.
    pub retention_tensions_cm: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 300,
            regimes: default_regimes(),
            noise_sd: 0.01,
            log_noise_scale: 1.0,
            scale_effect: ScaleEffect {
                ln_alpha_per_length: -0.03,
                theta_s_per_length: -0.0015,
                ..ScaleEffect::default()
            },
            seed: 0,
            retention_tensions_cm: alloc::vec![1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 15300.0],
        }
    }
}

impl SynthConfig {
    /// The default population without any measurement-scale effect.
    pub fn two_regime() -> Self {
        Self { scale_effect: ScaleEffect::none(), ..Self::default() }
    }
}

/// Fine soils (sand < 50 %) and coarse soils (sand ≥ 50 %). They respond
/// with opposite signs to bulk density and clay and with different slopes
/// to sand. Only coarse soils feel the scale effect.
pub fn default_regimes() -> Vec<RegimeRule> {
    use names::*;
    alloc::vec![
        RegimeRule {
            name: "fine".into(),
            conditions: alloc::vec![Condition { feature: SAND.into(), lo: None, hi: Some(50.0) }],
            theta_r: LinearTerm::new(0.03, &[(CLAY, 0.002)]),
            theta_s: LinearTerm::new(1.09, &[(BULK_DENSITY, -0.45)]),
            ln_alpha: LinearTerm::new(-3.5, &[(SAND, 0.01)]),
            ln_n: LinearTerm::new(0.3, &[(SAND, 0.003)]),
            ln_ksat: LinearTerm::new(4.1, &[(SAND, 0.03), (BULK_DENSITY, -1.5)]),
            scale_sensitivity: 0.0,
        },
        RegimeRule {
            name: "coarse".into(),
            conditions: alloc::vec![Condition { feature: SAND.into(), lo: Some(50.0), hi: None }],
            theta_r: LinearTerm::new(0.13, &[(CLAY, -0.003)]),
            theta_s: LinearTerm::new(-0.17, &[(BULK_DENSITY, 0.45)]),
            ln_alpha: LinearTerm::new(-3.5, &[(SAND, 0.01)]),
            ln_n: LinearTerm::new(0.15, &[(SAND, 0.006)]),
            ln_ksat: LinearTerm::new(-0.1, &[(SAND, 0.03), (BULK_DENSITY, 1.5)]),
            scale_sensitivity: 1.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSample {
    pub id: String,
    pub regime: String,
    pub params: VgParameters,
    /// cm·day⁻¹
    pub ksat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: Vec<SynthSample>,
    /// Noisy retention measurements per sample id.
    pub retention: Vec<(String, Vec<RetentionPoint>)>,
}

/// Index of the single regime matching the features.
pub fn regime_of(regimes: &[RegimeRule], id: &str, features: &BTreeMap<String, f64>) -> Result<usize, SynthError> {
    let hits: Vec<usize> = (0..regimes.len()).filter(|&i| regimes[i].matches(features)).collect();
    match hits.as_slice() {
        [one] => Ok(*one),
        _ => Err(SynthError::InvalidPartition { id: id.to_string(), matches: hits.len() }),
    }
}

/// Noise-free parameters and ln Ksat for a sample, scale effect included.
pub fn regime_values(
    rule: &RegimeRule,
    scale: &ScaleEffect,
    features: &BTreeMap<String, f64>,
) -> (f64, f64, f64, f64, f64) {
    let k = rule.scale_sensitivity;
    let length = k * features.get(names::LENGTH).copied().unwrap_or(0.0);
    let diameter = k * features.get(names::INTERNAL_DIAMETER).copied().unwrap_or(0.0);
    (
        rule.theta_r.eval(features),
        rule.theta_s.eval(features) + scale.theta_s_per_length * length + scale.theta_s_per_diameter * diameter,
        rule.ln_alpha.eval(features) + scale.ln_alpha_per_length * length + scale.ln_alpha_per_diameter * diameter,
        rule.ln_n.eval(features),
        rule.ln_ksat.eval(features) + scale.ln_ksat_per_length * length + scale.ln_ksat_per_diameter * diameter,
    )
}

fn texture(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    // Uniform on the simplex: spacings of two sorted uniforms.
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let sand = 100.0 * lo;
    let silt = 100.0 * (hi - lo);
    (sand, silt, 100.0 - sand - silt)
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    if !(config.noise_sd >= 0.0 && config.noise_sd.is_finite() && config.log_noise_scale >= 0.0) {
        return Err(SynthError::InvalidNoise);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let sd = config.noise_sd;
    let log_sd = config.log_noise_scale * sd;
    let width = digits(config.n_samples);

    let mut samples = Vec::with_capacity(config.n_samples);
    let mut truth = Vec::with_capacity(config.n_samples);
    let mut retention = Vec::with_capacity(config.n_samples);
    let swrc = ModelConfig::new(ConfigId::Swrc1);
    let swrc_param = ModelConfig::new(ConfigId::Swrc3);
    for i in 0..config.n_samples {
        let id = format!("syn{:0width$}", i + 1);
        let (sand, silt, clay) = texture(&mut rng);
        let bd = rng.random_range(1.1..1.7);
        let diameter = *DIAMETERS_CM.choose(&mut rng).expect("nonempty");
        let length = *LENGTHS_CM.choose(&mut rng).expect("nonempty");
        let (dg, sg) = texture_statistics(sand, silt, clay)?;
        let mut features = BTreeMap::new();
        for (k, v) in [
            (names::SAND, sand),
            (names::SILT, silt),
            (names::CLAY, clay),
            (names::BULK_DENSITY, bd),
            (names::DG, dg),
            (names::SIGMA_G, sg),
            (names::INTERNAL_DIAMETER, diameter),
            (names::LENGTH, length),
        ] {
            features.insert(k.to_string(), v);
        }
        let r = regime_of(&config.regimes, &id, &features)?;
        let rule = &config.regimes[r];
        let (tr, ts, la, ln_n, lk) = regime_values(rule, &config.scale_effect, &features);
        let mut draw = |s: f64| if s > 0.0 { s * noise.sample(&mut rng) } else { 0.0 };
        // Noise never pushes θr below zero.
        let (tr, ts, la, ln_n, lk) =
            ((tr + draw(sd)).max(0.0), ts + draw(sd), la + draw(log_sd), ln_n + draw(log_sd), lk + draw(log_sd));
        let params = VgParameters::new(tr, ts, exp(la), exp(ln_n)).map_err(|source| SynthError::InvalidParameters {
            regime: rule.name.clone(),
            id: id.clone(),
            source,
        })?;
        let ksat = exp(lk);

        let mut points = Vec::with_capacity(config.retention_tensions_cm.len());
        for &h in &config.retention_tensions_cm {
            let theta = (vg_theta(&params, h)? + draw(sd)).clamp(0.0, 1.0);
            points.push(RetentionPoint::new(h, theta));
        }

        let mut sample = Sample::new(id.clone());
        sample.features = features;
        let basis = InflectionBasis::Head;
        for cfg in [&swrc, &swrc_param] {
            for (k, v) in build_targets(cfg, Some(&params), None, &DEFAULT_TENSIONS_KPA, basis)? {
                sample.targets.insert(k, v);
            }
        }
        sample.targets.insert(names::ALPHA.into(), params.alpha);
        sample.targets.insert(names::N.into(), params.n);
        sample.targets.insert(names::LN_KSAT.into(), lk);
        samples.push(sample);
        truth.push(SynthSample { id: id.clone(), regime: rule.name.clone(), params, ksat });
        retention.push((id, points));
    }
    let feature_names = [
        names::SAND,
        names::SILT,
        names::CLAY,
        names::BULK_DENSITY,
        names::DG,
        names::SIGMA_G,
        names::INTERNAL_DIAMETER,
        names::LENGTH,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let dataset = Dataset::new(samples, feature_names, target_names())?;
    Ok(SynthOutput { dataset, truth, retention })
}

/// Every target column a generated dataset carries.
pub fn target_names() -> Vec<String> {
    let mut t = point_target_names(&DEFAULT_TENSIONS_KPA);
    for name in [names::THETA_R, names::ALPHA, names::N, names::LN_ALPHA, names::LN_N, names::LN_KSAT] {
        t.push(name.to_string());
    }
    t
}

fn digits(n: usize) -> usize {
    let mut d = 4;
    let mut cap = 10_000;
    while n >= cap {
        d += 1;
        cap *= 10;
    }
    d
}

/// Recomputes each noise-free target from the features by the regime formulas.
pub fn noise_free_targets(config: &SynthConfig, sample: &Sample) -> Result<BTreeMap<String, f64>, SynthError> {
    let r = regime_of(&config.regimes, &sample.id, &sample.features)?;
    let (tr, ts, la, ln_n, lk) = regime_values(&config.regimes[r], &config.scale_effect, &sample.features);
    let params = VgParameters::new(tr, ts, exp(la), exp(ln_n))?;
    let mut out = build_targets(
        &ModelConfig::new(ConfigId::Swrc1),
        Some(&params),
        None,
        &DEFAULT_TENSIONS_KPA,
        InflectionBasis::Head,
    )?;
    out.insert(names::THETA_R.into(), tr);
    out.insert(names::LN_ALPHA.into(), ln(params.alpha));
    out.insert(names::LN_N.into(), ln(params.n));
    out.insert(names::LN_KSAT.into(), lk);
    Ok(out)
}
