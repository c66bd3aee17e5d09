//! Multiple linear regression: least squares and ridge via Householder QR.
//!
//! Features are standardized with the training means and population
//! standard deviations before solving; the response is centred, which makes
//! the intercept the training mean and keeps the ridge penalty off it.
//! Predictions undo the standardization, so callers only ever see raw
//! feature units.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::math::{sq, sqrt};
use crate::matrix::Matrix;

/// `|R_jj|` below this fraction of the largest column norm marks column `j`
/// as linearly dependent on the columns before it.
const RANK_TOLERANCE: f64 = 1e-9;

/// Scale of the fallback ridge relative to `trace(ZᵀZ) / p`.
pub const FALLBACK_RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinregError {
    #[error("no training rows")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank-deficient design; dependent columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("negative ridge penalty {0}")]
    NegativeRidge(f64),
    #[error("missing feature `{0}`")]
    MissingFeature(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    features: Vec<String>,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Coefficients on the standardized features.
    std_coefficients: Vec<f64>,
    y_mean: f64,
    training_count: usize,
    ridge: f64,
}

impl LinearModel {
    /// A model given directly in raw units: `intercept + Σ coefᵢ·xᵢ`.
    pub fn from_coefficients(features: Vec<String>, intercept: f64, coefficients: Vec<f64>) -> Self {
        assert_eq!(features.len(), coefficients.len());
        let p = features.len();
        Self {
            features,
            means: alloc::vec![0.0; p],
            scales: alloc::vec![1.0; p],
            std_coefficients: coefficients,
            y_mean: intercept,
            training_count: 0,
            ridge: 0.0,
        }
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn training_count(&self) -> usize {
        self.training_count
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Intercept in raw feature units.
    pub fn intercept(&self) -> f64 {
        self.y_mean
            - self
                .std_coefficients
                .iter()
                .zip(self.means.iter().zip(&self.scales))
                .map(|(g, (m, s))| g * m / s)
                .sum::<f64>()
    }

    /// Coefficients in raw feature units, keyed by feature name.
    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        self.features
            .iter()
            .zip(self.std_coefficients.iter().zip(&self.scales))
            .map(|(n, (g, s))| (n.clone(), g / s))
            .collect()
    }

    /// Prediction for a row whose values follow [`Self::features`] order.
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.features.len());
        let mut acc = self.y_mean;
        for j in 0..x.len() {
            acc += self.std_coefficients[j] * (x[j] - self.means[j]) / self.scales[j];
        }
        acc
    }

    pub fn predict_with(&self, mut value: impl FnMut(&str) -> Option<f64>) -> Result<f64, LinregError> {
        let mut acc = self.y_mean;
        for j in 0..self.features.len() {
            let v = value(&self.features[j]).ok_or_else(|| LinregError::MissingFeature(self.features[j].clone()))?;
            acc += self.std_coefficients[j] * (v - self.means[j]) / self.scales[j];
        }
        Ok(acc)
    }

    pub fn predict_map(&self, x: &BTreeMap<String, f64>) -> Result<f64, LinregError> {
        self.predict_with(|f| x.get(f).copied())
    }

    pub fn predict_sample(&self, sample: &Sample) -> Result<f64, LinregError> {
        self.predict_with(|f| sample.value(f))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).map(|r| self.predict_row(x.row(r))).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.y_mean.is_finite()
            && self.std_coefficients.iter().all(|v| v.is_finite())
            && self.means.iter().all(|v| v.is_finite())
            && self.scales.iter().all(|v| v.is_finite())
    }
}

struct Standardized {
    z: Matrix,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn standardize(x: &Matrix, y: &[f64]) -> Standardized {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let mut means = alloc::vec![0.0; p];
    let mut scales = alloc::vec![1.0; p];
    for j in 0..p {
        let mean = (0..n).map(|r| x.get(r, j)).sum::<f64>() / nf;
        let var = (0..n).map(|r| sq(x.get(r, j) - mean)).sum::<f64>() / nf;
        means[j] = mean;
        let sd = sqrt(var);
        if sd > 1e-300 {
            scales[j] = sd;
        }
    }
    let mut z = Matrix::zeros(n, p);
    for r in 0..n {
        for j in 0..p {
            z.set(r, j, (x.get(r, j) - means[j]) / scales[j]);
        }
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    let yc = y.iter().map(|v| v - y_mean).collect();
    Standardized { z, means, scales, y_mean, yc }
}

/// Householder QR least squares of `a·β ≈ b`. Returns the solution and the
/// diagonal of `R`.
fn qr_solve(mut a: Matrix, mut b: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let (m, p) = (a.nrows(), a.ncols());
    let mut diag = alloc::vec![0.0; p];
    for k in 0..p.min(m) {
        let norm = sqrt((k..m).map(|i| sq(a.get(i, k))).sum::<f64>());
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a.get(k, k) > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in column k below the diagonal.
        let vk = a.get(k, k) - alpha;
        a.set(k, k, vk);
        let vnorm2 = vk * vk + (k + 1..m).map(|i| sq(a.get(i, k))).sum::<f64>();
        if vnorm2 == 0.0 {
            diag[k] = alpha;
            continue;
        }
        for j in k + 1..p {
            let dot: f64 = (k..m).map(|i| a.get(i, k) * a.get(i, j)).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                let v = a.get(i, j) - f * a.get(i, k);
                a.set(i, j, v);
            }
        }
        let dot: f64 = (k..m).map(|i| a.get(i, k) * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            b[i] -= f * a.get(i, k);
        }
        diag[k] = alpha;
    }
    let mut beta = alloc::vec![0.0; p];
    for k in (0..p).rev() {
        if diag[k] == 0.0 {
            continue;
        }
        let mut s = b[k];
        for j in k + 1..p {
            s -= a.get(k, j) * beta[j];
        }
        beta[k] = s / diag[k];
    }
    (beta, diag)
}

fn check_inputs(x: &Matrix, y: &[f64], names: &[String], ridge: f64) -> Result<(), LinregError> {
    if x.nrows() != y.len() {
        return Err(LinregError::DimensionMismatch(alloc::format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.ncols() != names.len() {
        return Err(LinregError::DimensionMismatch(alloc::format!("{} columns but {} names", x.ncols(), names.len())));
    }
    if y.is_empty() {
        return Err(LinregError::Empty);
    }
    if !(ridge >= 0.0) {
        return Err(LinregError::NegativeRidge(ridge));
    }
    if y.iter().any(|v| !v.is_finite()) || (0..x.nrows()).any(|r| x.row(r).iter().any(|v| !v.is_finite())) {
        return Err(LinregError::NonFinite);
    }
    Ok(())
}

fn solve(std: &Standardized, names: &[String], ridge: f64, n: usize) -> Result<LinearModel, LinregError> {
    let p = names.len();
    let (a, b) = if ridge > 0.0 {
        let mut data = Vec::with_capacity((n + p) * p);
        for r in 0..n {
            data.extend_from_slice(std.z.row(r));
        }
        let root = sqrt(ridge);
        for j in 0..p {
            for c in 0..p {
                data.push(if c == j { root } else { 0.0 });
            }
        }
        let mut b = std.yc.clone();
        b.extend(core::iter::repeat_n(0.0, p));
        (Matrix::from_row_major(n + p, p, data), b)
    } else {
        (std.z.clone(), std.yc.clone())
    };
    let (gamma, diag) = qr_solve(a, b);
    if ridge == 0.0 {
        let max_norm = (0..p).map(|j| sqrt((0..n).map(|r| sq(std.z.get(r, j))).sum::<f64>())).fold(0.0, f64::max);
        let cutoff = RANK_TOLERANCE * max_norm.max(f64::MIN_POSITIVE);
        let dependent: Vec<String> = (0..p).filter(|&j| diag[j].abs() <= cutoff).map(|j| names[j].clone()).collect();
        if !dependent.is_empty() || (p > 0 && n <= p) {
            let columns = if dependent.is_empty() { names.to_vec() } else { dependent };
            return Err(LinregError::RankDeficient { columns });
        }
    }
    let model = LinearModel {
        features: names.to_vec(),
        means: std.means.clone(),
        scales: std.scales.clone(),
        std_coefficients: gamma,
        y_mean: std.y_mean,
        training_count: n,
        ridge,
    };
    if !model.is_finite() {
        return Err(LinregError::NonFinite);
    }
    Ok(model)
}

/// Minimizes `Σ(y − β₀ − Σβⱼzⱼ)² + ridge·‖β‖²` over standardized features
/// `z`. With `ridge == 0` a rank-deficient design is an error naming the
/// dependent columns.
pub fn ols_fit(x: &Matrix, y: &[f64], names: &[String], ridge: f64) -> Result<LinearModel, LinregError> {
    check_inputs(x, y, names, ridge)?;
    let std = standardize(x, y);
    solve(&std, names, ridge, y.len())
}

fn ridge_for(std: &Standardized, p: usize) -> f64 {
    let trace: f64 = (0..std.z.nrows()).map(|r| std.z.row(r).iter().map(|v| v * v).sum::<f64>()).sum();
    match FALLBACK_RIDGE_SCALE * trace / p.max(1) as f64 {
        r if r > 0.0 => r,
        _ => FALLBACK_RIDGE_SCALE,
    }
}

/// Ridge used when a plain least-squares fit is impossible:
/// `1e-8 · trace(ZᵀZ) / p` on the standardized design (1e-8 if that is 0).
pub fn fallback_ridge(x: &Matrix, y: &[f64]) -> f64 {
    ridge_for(&standardize(x, y), x.ncols())
}

/// Least squares when the system is well posed, otherwise the small
/// [`fallback_ridge`]. Every CPXR model and the MLR baseline go through here.
pub fn fit_with_fallback(x: &Matrix, y: &[f64], names: &[String]) -> Result<LinearModel, LinregError> {
    check_inputs(x, y, names, 0.0)?;
    let std = standardize(x, y);
    let n = y.len();
    if n > names.len() {
        match solve(&std, names, 0.0, n) {
            Err(LinregError::RankDeficient { .. }) => {}
            other => return other,
        }
    }
    solve(&std, names, ridge_for(&std, names.len()), n)
}

/// `yᵢ − f(xᵢ)` in input order.
pub fn residuals(model: &LinearModel, x: &Matrix, y: &[f64]) -> Result<Vec<f64>, LinregError> {
    if x.ncols() != model.features.len() || x.nrows() != y.len() {
        return Err(LinregError::DimensionMismatch(alloc::format!(
            "model has {} features; got {}x{} matrix and {} targets",
            model.features.len(),
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    Ok((0..x.nrows()).map(|r| y[r] - model.predict_row(x.row(r))).collect())
}
