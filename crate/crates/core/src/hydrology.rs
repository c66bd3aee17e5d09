//! Van Genuchten retention model, curve fitting, derived water contents,
//! texture statistics and the eight model configurations.
//!
//! Tension heads are in cm of water throughout; kPa inputs are converted
//! with [`CM_PER_KPA`].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{exp, ln, ln1p, powf, sq, sqrt};

/// cm of water per kPa (water at 20 °C).
pub const CM_PER_KPA: f64 = 10.197;

/// Tension ladder (kPa) for point targets.
pub const DEFAULT_TENSIONS_KPA: [f64; 8] = [10.0, 30.0, 50.0, 100.0, 300.0, 500.0, 1000.0, 1500.0];

/// Representative particle diameters (mm) of the clay, silt and sand fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionDiameters {
    pub clay_mm: f64,
    pub silt_mm: f64,
    pub sand_mm: f64,
}

impl Default for FractionDiameters {
    fn default() -> Self {
        Self { clay_mm: 0.001, silt_mm: 0.026, sand_mm: 1.025 }
    }
}

/// Canonical column names shared by the data files and configurations.
pub mod names {
    pub const ID: &str = "id";
    pub const SAND: &str = "sand";
    pub const SILT: &str = "silt";
    pub const CLAY: &str = "clay";
    pub const BULK_DENSITY: &str = "bulk_density";
    pub const DG: &str = "dg_mm";
    pub const SIGMA_G: &str = "sigma_g";
    pub const INTERNAL_DIAMETER: &str = "internal_diameter_cm";
    pub const LENGTH: &str = "length_cm";
    pub const THETA_R: &str = "theta_r";
    pub const THETA_S: &str = "theta_s";
    pub const ALPHA: &str = "alpha_per_cm";
    pub const N: &str = "n";
    pub const THETA_I: &str = "theta_i";
    pub const LN_ALPHA: &str = "ln_alpha";
    pub const LN_N: &str = "ln_n";
    pub const LN_KSAT: &str = "ln_ksat";

    /// Column name of the water content at a tension in kPa, e.g. `theta_30`.
    pub fn theta_at(kpa: f64) -> alloc::string::String {
        if kpa == crate::math::trunc(kpa) {
            alloc::format!("theta_{}", kpa as i64)
        } else {
            alloc::format!("theta_{kpa}")
        }
    }

    pub fn is_water_content(name: &str) -> bool {
        name.starts_with("theta_")
    }

    /// Targets whose values are natural logarithms.
    pub fn is_log_target(name: &str) -> bool {
        matches!(name, LN_ALPHA | LN_N | LN_KSAT)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydrologyError {
    #[error("invalid van Genuchten parameters: {0}")]
    InvalidParameters(String),
    #[error("negative tension head {0}")]
    NegativeTension(f64),
    #[error("need at least 5 retention points, got {0}")]
    TooFewPoints(usize),
    #[error("retention points must span at least a decade of tension")]
    InsufficientSpan,
    #[error("retention point out of range: h = {h}, theta = {theta}")]
    InvalidPoint { h: f64, theta: f64 },
    #[error("no start converged within {0} iterations")]
    NonConvergence(usize),
    #[error("sand + silt + clay = {0}, expected 100 +/- 0.5")]
    TextureSum(f64),
    #[error("saturated conductivity must be positive, got {0}")]
    NonPositiveKsat(f64),
    #[error("configuration {0} needs {1}")]
    MissingInput(ConfigId, &'static str),
    #[error("unknown model configuration `{0}`")]
    UnknownConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParameters {
    pub theta_r: f64,
    pub theta_s: f64,
    /// cm⁻¹
    pub alpha: f64,
    pub n: f64,
    /// Root mean square residual of the fit; 0 for parameters not obtained by fitting.
    pub fit_rmse: f64,
}

impl VgParameters {
    pub fn new(theta_r: f64, theta_s: f64, alpha: f64, n: f64) -> Result<Self, HydrologyError> {
        let p = Self { theta_r, theta_s, alpha, n, fit_rmse: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HydrologyError> {
        let ok = self.theta_r >= 0.0
            && self.theta_r < self.theta_s
            && self.theta_s <= 1.0
            && self.alpha > 0.0
            && self.alpha.is_finite()
            && self.n > 1.0
            && self.n.is_finite();
        if ok {
            Ok(())
        } else {
            Err(HydrologyError::InvalidParameters(alloc::format!("{self:?}")))
        }
    }

    pub fn m(&self) -> f64 {
        1.0 - 1.0 / self.n
    }

    /// Effective saturation `[1 + (αh)ⁿ]^(−m)` without validation.
    fn saturation(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 1.0;
        }
        let t = self.n * ln(self.alpha * h);
        // ln(1 + e^t), stable for large t
        let l = if t > 30.0 { t + ln1p(exp(-t)) } else { ln1p(exp(t)) };
        exp(-self.m() * l)
    }

    fn theta_unchecked(&self, h: f64) -> f64 {
        self.theta_r + (self.theta_s - self.theta_r) * self.saturation(h)
    }
}

/// `θ(h) = θr + (θs − θr)[1 + (αh)ⁿ]^(−m)`, `m = 1 − 1/n`.
pub fn vg_theta(params: &VgParameters, h: f64) -> Result<f64, HydrologyError> {
    params.validate()?;
    if h < 0.0 || h.is_nan() {
        return Err(HydrologyError::NegativeTension(h));
    }
    Ok(params.theta_unchecked(h))
}

/// Which inflection of the retention curve is reported as `theta_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflectionBasis {
    /// Inflection of θ(h): `(αh)ⁿ = m`.
    #[default]
    Head,
    /// Inflection of θ(ln h): `(αh)ⁿ = 1/m`.
    LogHead,
}

/// Tension head (cm) and water content at the inflection point.
pub fn inflection_point(params: &VgParameters, basis: InflectionBasis) -> (f64, f64) {
    let m = params.m();
    let x = match basis {
        InflectionBasis::Head => m,
        InflectionBasis::LogHead => 1.0 / m,
    };
    let h = powf(x, 1.0 / params.n) / params.alpha;
    let theta = params.theta_r + (params.theta_s - params.theta_r) * powf(1.0 + x, -m);
    (h, theta)
}

/// Water contents at saturation, at the inflection point and at each tension
/// of the ladder (kPa), keyed by target name.
pub fn derived_water_contents(
    params: &VgParameters,
    tensions_kpa: &[f64],
    basis: InflectionBasis,
) -> Result<BTreeMap<String, f64>, HydrologyError> {
    params.validate()?;
    let mut out = BTreeMap::new();
    out.insert(names::THETA_S.to_string(), params.theta_unchecked(0.0));
    out.insert(names::THETA_I.to_string(), inflection_point(params, basis).1);
    for &p in tensions_kpa {
        out.insert(names::theta_at(p), vg_theta(params, p * CM_PER_KPA)?);
    }
    Ok(out)
}

/// Point-target names in ladder order: θs, θi, then one per tension.
pub fn point_target_names(tensions_kpa: &[f64]) -> Vec<String> {
    let mut v = alloc::vec![names::THETA_S.to_string(), names::THETA_I.to_string()];
    v.extend(tensions_kpa.iter().map(|&p| names::theta_at(p)));
    v
}

/// Geometric mean diameter and geometric standard deviation (both mm) of the
/// particle-size distribution implied by the texture percentages.
pub fn texture_statistics_with(
    sand: f64,
    silt: f64,
    clay: f64,
    diameters: &FractionDiameters,
) -> Result<(f64, f64), HydrologyError> {
    let sum = sand + silt + clay;
    if !((sum - 100.0).abs() <= crate::dataset::TEXTURE_SUM_TOLERANCE) || sand < 0.0 || silt < 0.0 || clay < 0.0 {
        return Err(HydrologyError::TextureSum(sum));
    }
    let fr = [(clay / 100.0, diameters.clay_mm), (silt / 100.0, diameters.silt_mm), (sand / 100.0, diameters.sand_mm)];
    let a: f64 = fr.iter().map(|&(f, m)| f * ln(m)).sum();
    let second: f64 = fr.iter().map(|&(f, m)| f * ln(m) * ln(m)).sum();
    let b = sqrt((second - a * a).max(0.0));
    Ok((exp(a), exp(b)))
}

pub fn texture_statistics(sand: f64, silt: f64, clay: f64) -> Result<(f64, f64), HydrologyError> {
    texture_statistics_with(sand, silt, clay, &FractionDiameters::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionPoint {
    /// cm of water
    pub tension: f64,
    pub theta: f64,
}

impl RetentionPoint {
    pub fn new(tension: f64, theta: f64) -> Self {
        Self { tension, theta }
    }
}

/// Options for [`fit_vg_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VgFitOptions {
    pub max_iterations: usize,
    /// Relative change of the sum of squares below which a start has converged.
    pub tolerance: f64,
}

impl Default for VgFitOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-15 }
    }
}

const RATIO_CLAMP: f64 = 1e-9;

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + exp(-u))
    } else {
        let e = exp(u);
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(RATIO_CLAMP, 1.0 - RATIO_CLAMP);
    ln(p / (1.0 - p))
}

/// Unconstrained coordinates: logit θs, logit(θr/θs), ln α, ln(n − 1).
#[derive(Debug, Clone, Copy)]
struct Transformed([f64; 4]);

impl Transformed {
    fn from_params(p: &VgParameters) -> Self {
        Self([logit(p.theta_s), logit(p.theta_r / p.theta_s), ln(p.alpha), ln(p.n - 1.0)])
    }

    fn params(&self) -> VgParameters {
        let theta_s = sigmoid(self.0[0]);
        let ratio = sigmoid(self.0[1]);
        VgParameters {
            theta_r: theta_s * ratio,
            theta_s,
            alpha: exp(self.0[2]),
            n: 1.0 + exp(self.0[3]),
            fit_rmse: 0.0,
        }
    }
}

fn sse(points: &[RetentionPoint], p: &VgParameters) -> f64 {
    points.iter().map(|pt| sq(p.theta_unchecked(pt.tension) - pt.theta)).sum()
}

/// Residuals and Jacobian rows (w.r.t. the transformed coordinates).
fn residuals_and_jacobian(points: &[RetentionPoint], u: &Transformed) -> (Vec<f64>, Vec<[f64; 4]>) {
    let p = u.params();
    let ratio = sigmoid(u.0[1]);
    let (ts, tr, a, n) = (p.theta_s, p.theta_r, p.alpha, p.n);
    let m = p.m();
    let dts_du0 = ts * (1.0 - ts);
    let mut r = Vec::with_capacity(points.len());
    let mut jac = Vec::with_capacity(points.len());
    for pt in points {
        let h = pt.tension;
        let s = p.saturation(h);
        r.push(tr + (ts - tr) * s - pt.theta);
        let (ds_da, ds_dn) = if h > 0.0 {
            let lah = ln(a * h);
            let x = exp(n * lah);
            let l1 = if n * lah > 30.0 { n * lah + ln1p(exp(-n * lah)) } else { ln1p(x) };
            // x / (1 + x) computed without overflow
            let frac = if n * lah > 30.0 { 1.0 / (1.0 + exp(-n * lah)) } else { x / (1.0 + x) };
            let ds_da = -m * s * n * frac / a;
            let ds_dn = s * (-(1.0 / (n * n)) * l1 - m * frac * lah);
            (ds_da, ds_dn)
        } else {
            (0.0, 0.0)
        };
        let dth_dtr = 1.0 - s;
        let dth_dts = s;
        // θr = θs·ratio
        let d0 = dth_dts * dts_du0 + dth_dtr * ratio * dts_du0;
        let d1 = dth_dtr * ts * ratio * (1.0 - ratio);
        let d2 = (ts - tr) * ds_da * a;
        let d3 = (ts - tr) * ds_dn * (n - 1.0);
        jac.push([d0, d1, d2, d3]);
    }
    (r, jac)
}

/// Solves the 4x4 symmetric system by Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for k in 0..4 {
        let piv = (k..4).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..4 {
            let f = a[i][k] / a[k][k];
            for j in k..4 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 4];
    for k in (0..4).rev() {
        let s: f64 = (k + 1..4).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct StartResult {
    params: VgParameters,
    sse: f64,
    converged: bool,
}

/// Levenberg–Marquardt (damped Gauss–Newton) from one start.
fn levenberg_marquardt(points: &[RetentionPoint], start: &VgParameters, opts: &VgFitOptions) -> StartResult {
    let mut u = Transformed::from_params(start);
    let mut cost = sse(points, &u.params());
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iterations {
        let (r, jac) = residuals_and_jacobian(points, &u);
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (ri, row) in r.iter().zip(&jac) {
            for i in 0..4 {
                jtr[i] += row[i] * ri;
                for j in 0..4 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        if cost == 0.0 || jtr.iter().all(|g| g.abs() < 1e-300) {
            return StartResult { params: u.params(), sse: cost, converged: true };
        }
        loop {
            let mut a = jtj;
            for i in 0..4 {
                a[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let step = solve4(a, [-jtr[0], -jtr[1], -jtr[2], -jtr[3]]);
            let trial = step.map(|d| Transformed([u.0[0] + d[0], u.0[1] + d[1], u.0[2] + d[2], u.0[3] + d[3]]));
            let trial_cost = trial.as_ref().map(|t| sse(points, &t.params())).filter(|c| c.is_finite());
            match (trial, trial_cost) {
                (Some(t), Some(c)) if c < cost => {
                    let rel = (cost - c) / cost;
                    u = t;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    if rel < opts.tolerance {
                        return StartResult { params: u.params(), sse: cost, converged: true };
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        // No descent direction left: a local minimum.
                        return StartResult { params: u.params(), sse: cost, converged: true };
                    }
                }
            }
        }
    }
    StartResult { params: u.params(), sse: cost, converged: false }
}

fn starts(points: &[RetentionPoint]) -> Vec<VgParameters> {
    let max = points.iter().map(|p| p.theta).fold(f64::MIN, f64::max);
    let min = points.iter().map(|p| p.theta).fold(f64::MAX, f64::min);
    let theta_s = max.clamp(1e-3, 1.0 - 1e-6);
    let theta_r_grid = (0.5 * min).clamp(0.0, 0.9 * theta_s);
    let mut out = Vec::with_capacity(5);
    for &alpha in &[0.005, 0.05] {
        for &n in &[1.2, 2.0] {
            out.push(VgParameters { theta_r: theta_r_grid, theta_s, alpha, n, fit_rmse: 0.0 });
        }
    }
    // Data-driven: θ range from the data, α from the head where θ crosses mid-range.
    let mid = 0.5 * (max + min);
    let mut sorted: Vec<&RetentionPoint> = points.iter().filter(|p| p.tension > 0.0).collect();
    sorted.sort_by(|a, b| a.tension.total_cmp(&b.tension).then(b.theta.total_cmp(&a.theta)));
    let h_mid = sorted.iter().find(|p| p.theta <= mid).or(sorted.last()).map_or(100.0, |p| p.tension);
    out.push(VgParameters {
        theta_r: min.clamp(0.0, 0.99 * theta_s),
        theta_s,
        alpha: 1.0 / h_mid,
        n: 1.5,
        fit_rmse: 0.0,
    });
    out
}

/// Least-squares fit of the retention model to measured points.
pub fn fit_vg(points: &[RetentionPoint]) -> Result<VgParameters, HydrologyError> {
    fit_vg_with(points, &VgFitOptions::default())
}

/// Multistart Levenberg–Marquardt in transformed coordinates that keep
/// `0 ≤ θr < θs ≤ 1`, `α > 0` and `n > 1`. Points are sorted first so the
/// result does not depend on input order.
pub fn fit_vg_with(points: &[RetentionPoint], opts: &VgFitOptions) -> Result<VgParameters, HydrologyError> {
    if points.len() < 5 {
        return Err(HydrologyError::TooFewPoints(points.len()));
    }
    for p in points {
        if !(p.tension >= 0.0 && p.tension.is_finite() && (0.0..=1.0).contains(&p.theta)) {
            return Err(HydrologyError::InvalidPoint { h: p.tension, theta: p.theta });
        }
    }
    let positive = points.iter().map(|p| p.tension).filter(|&h| h > 0.0);
    let hmin = positive.clone().fold(f64::INFINITY, f64::min);
    let hmax = positive.fold(0.0, f64::max);
    if !(hmax >= 10.0 * hmin) {
        return Err(HydrologyError::InsufficientSpan);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.tension.total_cmp(&b.tension).then(a.theta.total_cmp(&b.theta)));

    let mut best: Option<StartResult> = None;
    for start in starts(&sorted) {
        let res = levenberg_marquardt(&sorted, &start, opts);
        if !res.converged {
            continue;
        }
        if best.as_ref().is_none_or(|b| res.sse < b.sse) {
            best = Some(res);
        }
    }
    let best = best.ok_or(HydrologyError::NonConvergence(opts.max_iterations))?;
    let mut params = best.params;
    params.fit_rmse = sqrt(best.sse / sorted.len() as f64);
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfigId {
    #[serde(rename = "SWRC1")]
    Swrc1,
    #[serde(rename = "SWRC2")]
    Swrc2,
    #[serde(rename = "SWRC3")]
    Swrc3,
    #[serde(rename = "SWRC4")]
    Swrc4,
    #[serde(rename = "SHC1")]
    Shc1,
    #[serde(rename = "SHC2")]
    Shc2,
    #[serde(rename = "SHC3")]
    Shc3,
    #[serde(rename = "SHC4")]
    Shc4,
}

impl ConfigId {
    pub const ALL: [ConfigId; 8] = [
        ConfigId::Swrc1,
        ConfigId::Swrc2,
        ConfigId::Swrc3,
        ConfigId::Swrc4,
        ConfigId::Shc1,
        ConfigId::Shc2,
        ConfigId::Shc3,
        ConfigId::Shc4,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConfigId::Swrc1 => "SWRC1",
            ConfigId::Swrc2 => "SWRC2",
            ConfigId::Swrc3 => "SWRC3",
            ConfigId::Swrc4 => "SWRC4",
            ConfigId::Shc1 => "SHC1",
            ConfigId::Shc2 => "SHC2",
            ConfigId::Shc3 => "SHC3",
            ConfigId::Shc4 => "SHC4",
        }
    }

    pub fn is_shc(&self) -> bool {
        matches!(self, ConfigId::Shc1 | ConfigId::Shc2 | ConfigId::Shc3 | ConfigId::Shc4)
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfigId {
    type Err = HydrologyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConfigId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| HydrologyError::UnknownConfig(s.to_string()))
    }
}

/// Inputs and outputs of one pedotransfer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub id: ConfigId,
    pub features: Vec<String>,
    pub targets: Vec<String>,
    pub parametric: bool,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl ModelConfig {
    pub fn new(id: ConfigId) -> Self {
        Self::with_tensions(id, &DEFAULT_TENSIONS_KPA)
    }

    /// Configuration with a custom tension ladder for point targets.
    pub fn with_tensions(id: ConfigId, tensions_kpa: &[f64]) -> Self {
        use names::*;
        let basic = [SAND, SILT, CLAY, BULK_DENSITY, DG, SIGMA_G];
        let scale = [INTERNAL_DIAMETER, LENGTH];
        let vg = [THETA_R, THETA_S, ALPHA, N];
        let mut features = strings(&basic);
        if matches!(id, ConfigId::Shc3 | ConfigId::Shc4) {
            features.extend(strings(&vg));
        }
        if matches!(id, ConfigId::Swrc2 | ConfigId::Swrc4 | ConfigId::Shc2 | ConfigId::Shc4) {
            features.extend(strings(&scale));
        }
        let (targets, parametric) = match id {
            ConfigId::Swrc1 | ConfigId::Swrc2 => (point_target_names(tensions_kpa), false),
            ConfigId::Swrc3 | ConfigId::Swrc4 => (strings(&[THETA_R, THETA_S, LN_ALPHA, LN_N]), true),
            _ => (strings(&[LN_KSAT]), false),
        };
        Self { id, features, targets, parametric }
    }

    /// Whether metrics for a target are computed on log values.
    pub fn log_space(&self, target: &str) -> bool {
        names::is_log_target(target)
    }
}

/// Target values required by a configuration.
pub fn build_targets(
    config: &ModelConfig,
    params: Option<&VgParameters>,
    ksat_cm_per_day: Option<f64>,
    tensions_kpa: &[f64],
    basis: InflectionBasis,
) -> Result<BTreeMap<String, f64>, HydrologyError> {
    let mut out = BTreeMap::new();
    match config.id {
        ConfigId::Swrc1 | ConfigId::Swrc2 => {
            let p = params.ok_or(HydrologyError::MissingInput(config.id, "retention parameters"))?;
            out = derived_water_contents(p, tensions_kpa, basis)?;
        }
        ConfigId::Swrc3 | ConfigId::Swrc4 => {
            let p = params.ok_or(HydrologyError::MissingInput(config.id, "retention parameters"))?;
            p.validate()?;
            out.insert(names::THETA_R.to_string(), p.theta_r);
            out.insert(names::THETA_S.to_string(), p.theta_s);
            out.insert(names::LN_ALPHA.to_string(), ln(p.alpha));
            out.insert(names::LN_N.to_string(), ln(p.n));
        }
        _ => {
            let k = ksat_cm_per_day.ok_or(HydrologyError::MissingInput(config.id, "saturated conductivity"))?;
            if !(k > 0.0) {
                return Err(HydrologyError::NonPositiveKsat(k));
            }
            out.insert(names::LN_KSAT.to_string(), ln(k));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(tr: f64, ts: f64, a: f64, n: f64) -> VgParameters {
        VgParameters::new(tr, ts, a, n).unwrap()
    }

    #[test]
    fn theta_limits_and_example() {
        let params = p(0.1, 0.5, 0.02, 2.0);
        assert_eq!(vg_theta(&params, 0.0).unwrap(), 0.5);
        let expected = 0.1 + 0.4 * powf(2.0, -0.5);
        assert!((vg_theta(&params, 50.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.3828).abs() < 1e-4);
        assert!((vg_theta(&params, 1e9).unwrap() - 0.1).abs() < 1e-6);
        assert!(vg_theta(&params, -1.0).is_err());
        let bad = VgParameters { n: 0.9, ..params };
        assert!(vg_theta(&bad, 1.0).is_err());
    }

    #[test]
    fn inflection_example() {
        let params = p(0.1, 0.5, 0.02, 2.0);
        let (h, theta) = inflection_point(&params, InflectionBasis::Head);
        assert!((theta - (0.1 + 0.4 * powf(1.5, -0.5))).abs() < 1e-14);
        assert!((theta - 0.4266).abs() < 1e-4);
        assert!((h * 0.02 - sqrt(0.5)).abs() < 1e-12);
        // Numerical second derivative changes sign around h.
        let d2 = |h: f64| {
            let e = 1e-3 * h;
            vg_theta(&params, h + e).unwrap() - 2.0 * vg_theta(&params, h).unwrap() + vg_theta(&params, h - e).unwrap()
        };
        assert!(d2(0.9 * h) * d2(1.1 * h) < 0.0);
    }

    #[test]
    fn derived_ladder_is_monotone() {
        let params = p(0.05, 0.42, 0.03, 1.6);
        let w = derived_water_contents(&params, &DEFAULT_TENSIONS_KPA, InflectionBasis::Head).unwrap();
        assert_eq!(w.len(), 10);
        let ladder: Vec<f64> = DEFAULT_TENSIONS_KPA.iter().map(|&k| w[&names::theta_at(k)]).collect();
        assert!(ladder.windows(2).all(|x| x[0] >= x[1]));
        assert!(w["theta_1500"] >= params.theta_r);
        assert_eq!(w["theta_s"], 0.42);
    }

    #[test]
    fn texture_examples() {
        let (dg, sg) = texture_statistics(100.0, 0.0, 0.0).unwrap();
        assert!((dg - 1.025).abs() < 1e-12);
        assert!((sg - 1.0).abs() < 1e-6);
        let (dg, sg) = texture_statistics(50.0, 0.0, 50.0).unwrap();
        assert!((dg - 0.0321).abs() < 1e-4, "{dg}");
        assert!((sg - 32.0).abs() < 0.05, "{sg}");
        assert_eq!(texture_statistics(50.0, 30.0, 19.0), Err(HydrologyError::TextureSum(99.0)));
    }

    fn synthetic(params: &VgParameters, n: usize) -> Vec<RetentionPoint> {
        (0..n)
            .map(|i| {
                let h = powf(10.0, 4.0 * i as f64 / (n - 1) as f64);
                RetentionPoint::new(h, vg_theta(params, h).unwrap())
            })
            .collect()
    }

    #[test]
    fn noise_free_recovery() {
        let truth = p(0.10, 0.45, 0.015, 1.8);
        let fit = fit_vg(&synthetic(&truth, 20)).unwrap();
        for (a, b) in [(fit.theta_r, 0.10), (fit.theta_s, 0.45), (fit.alpha, 0.015), (fit.n, 1.8)] {
            assert!((a - b).abs() / b < 1e-3, "{fit:?}");
        }
        assert!(fit.fit_rmse < 1e-6);
    }

    #[test]
    fn fit_preconditions() {
        let pts = vec![RetentionPoint::new(100.0, 0.3); 6];
        assert_eq!(fit_vg(&pts), Err(HydrologyError::InsufficientSpan));
        assert_eq!(fit_vg(&pts[..3]), Err(HydrologyError::TooFewPoints(3)));
        let mut bad = synthetic(&p(0.1, 0.4, 0.01, 2.0), 8);
        bad[2].theta = 1.5;
        assert!(matches!(fit_vg(&bad), Err(HydrologyError::InvalidPoint { .. })));
    }

    #[test]
    fn fit_ignores_order_and_duplication() {
        let truth = p(0.08, 0.40, 0.02, 1.5);
        let mut pts = synthetic(&truth, 12);
        for (i, pt) in pts.iter_mut().enumerate() {
            pt.theta += if i % 2 == 0 { 0.004 } else { -0.003 };
        }
        let a = fit_vg(&pts).unwrap();
        let mut rev = pts.clone();
        rev.reverse();
        assert_eq!(fit_vg(&rev).unwrap(), a);
        let doubled: Vec<RetentionPoint> = pts.iter().flat_map(|&p| [p, p]).collect();
        let b = fit_vg(&doubled).unwrap();
        for (x, y) in [(a.theta_r, b.theta_r), (a.theta_s, b.theta_s), (a.alpha, b.alpha), (a.n, b.n)] {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-3), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn configurations_follow_the_model_table() {
        let c1 = ModelConfig::new(ConfigId::Swrc1);
        assert_eq!(c1.features.len(), 6);
        assert_eq!(c1.targets.len(), 10);
        assert_eq!(ModelConfig::new(ConfigId::Swrc2).features.len(), 8);
        let c3 = ModelConfig::new(ConfigId::Swrc3);
        assert_eq!(c3.targets, vec!["theta_r", "theta_s", "ln_alpha", "ln_n"]);
        assert!(c3.parametric);
        assert_eq!(ModelConfig::new(ConfigId::Shc1).targets, vec!["ln_ksat"]);
        assert_eq!(ModelConfig::new(ConfigId::Shc3).features.len(), 10);
        assert_eq!(ModelConfig::new(ConfigId::Shc4).features.len(), 12);
        assert_eq!("shc4".parse::<ConfigId>().unwrap(), ConfigId::Shc4);
        assert!("SWRC9".parse::<ConfigId>().is_err());
        assert_eq!(c1.targets[3], "theta_30");
    }

    #[test]
    fn targets_per_configuration() {
        let params = p(0.1, 0.45, 0.015, 1.8);
        let basis = InflectionBasis::Head;
        let t3 = build_targets(&ModelConfig::new(ConfigId::Swrc3), Some(&params), None, &DEFAULT_TENSIONS_KPA, basis)
            .unwrap();
        assert_eq!(t3.len(), 4);
        assert!((t3["ln_alpha"] - ln(0.015)).abs() < 1e-15);
        let shc = ModelConfig::new(ConfigId::Shc1);
        let t = build_targets(&shc, None, Some(25.0), &DEFAULT_TENSIONS_KPA, basis).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t["ln_ksat"] - ln(25.0)).abs() < 1e-15);
        assert_eq!(
            build_targets(&shc, None, Some(0.0), &DEFAULT_TENSIONS_KPA, basis),
            Err(HydrologyError::NonPositiveKsat(0.0))
        );
    }

    proptest::proptest! {
        #[test]
        fn theta_is_monotone_and_bounded(
            tr in 0.0f64..0.2, span in 0.1f64..0.5, la in -6.0f64..0.0, n in 1.05f64..6.0,
            h1 in 0.0f64..1e5, dh in 0.0f64..1e5,
        ) {
            let params = p(tr, tr + span, exp(la), n);
            let a = vg_theta(&params, h1).unwrap();
            let b = vg_theta(&params, h1 + dh).unwrap();
            proptest::prop_assert!(b <= a + 1e-15);
            proptest::prop_assert!(b >= tr - 1e-15 && a <= tr + span + 1e-15);
        }

        #[test]
        fn texture_bounds(sand in 0.0f64..100.0, frac in 0.0f64..1.0) {
            let silt = (100.0 - sand) * frac;
            let clay = 100.0 - sand - silt;
            let (dg, sg) = texture_statistics(sand, silt, clay).unwrap();
            proptest::prop_assert!((0.001 - 1e-12..=1.025 + 1e-12).contains(&dg));
            proptest::prop_assert!(sg >= 1.0 - 1e-12);
        }

        #[test]
        fn derived_sequence_monotone(tr in 0.0f64..0.2, span in 0.1f64..0.5, la in -6.0f64..0.0, n in 1.05f64..6.0) {
            let params = p(tr, tr + span, exp(la), n);
            let w = derived_water_contents(&params, &DEFAULT_TENSIONS_KPA, InflectionBasis::Head).unwrap();
            let mut prev = w["theta_s"];
            for &k in &DEFAULT_TENSIONS_KPA {
                let v = w[&names::theta_at(k)];
                proptest::prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }
}
