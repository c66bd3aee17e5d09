//! Repeated k-fold cross-validation of MLR and CPXR, accuracy metrics and
//! method comparisons.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpxr::{train_cpxr_detailed, CpxrConfig, CpxrError, PxrModel};
use crate::dataset::{assign_fold_indices, select_columns, Dataset, DatasetError};
use crate::hydrology::{ConfigId, ModelConfig};
use crate::linreg::{fit_with_fallback, LinregError};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("{predicted} predictions but {observed} observations")]
    LengthMismatch { predicted: usize, observed: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("reports differ: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Linreg(#[from] LinregError),
    #[error(transparent)]
    Cpxr(#[from] CpxrError),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CPXR")]
    Cpxr,
    #[serde(rename = "MLR")]
    Mlr,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cpxr => "CPXR",
            Method::Mlr => "MLR",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CPXR" => Ok(Method::Cpxr),
            "MLR" => Ok(Method::Mlr),
            _ => Err(EvalError::UnknownMethod(s.to_string())),
        }
    }
}

/// How R² is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Mode {
    /// Squared Pearson correlation of predicted and observed.
    #[default]
    SquaredCorrelation,
    /// `1 − SSE/SST`.
    Determination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    /// RMSE of log values; present only for log-space targets.
    pub rmsle: Option<f64>,
    /// Absent when undefined (constant observed or predicted values).
    pub r2: Option<f64>,
}

pub fn metrics(predicted: &[f64], observed: &[f64], log_space: bool) -> Result<MetricSet, EvalError> {
    metrics_with(predicted, observed, log_space, R2Mode::default())
}

/// Accuracy of `predicted` against `observed`. Log-space values are
/// expected already in natural-log units.
pub fn metrics_with(
    predicted: &[f64],
    observed: &[f64],
    log_space: bool,
    r2_mode: R2Mode,
) -> Result<MetricSet, EvalError> {
    if predicted.len() != observed.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), observed: observed.len() });
    }
    let n = observed.len();
    if n < 2 {
        return Err(EvalError::TooFewValues(n));
    }
    let nf = n as f64;
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    let rmse = sqrt(sse / nf);
    let mo = observed.iter().sum::<f64>() / nf;
    let sst: f64 = observed.iter().map(|o| (o - mo) * (o - mo)).sum();
    let r2 = match r2_mode {
        R2Mode::SquaredCorrelation => {
            let mp = predicted.iter().sum::<f64>() / nf;
            let spp: f64 = predicted.iter().map(|p| (p - mp) * (p - mp)).sum();
            let spo: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - mp) * (o - mo)).sum();
            (sst > 0.0 && spp > 0.0).then(|| (spo * spo / (spp * sst)).min(1.0))
        }
        R2Mode::Determination => (sst > 0.0).then(|| 1.0 - sse / sst),
    };
    Ok(MetricSet { rmse, rmsle: log_space.then_some(rmse), r2 })
}

/// Runs independent jobs `0..n` and returns their results in index order.
pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// k splits per repetition; split j tests on folds j and j+1 (mod k).
    #[default]
    RotatingPair,
    /// k splits per repetition; split j tests on fold j.
    Standard,
}

impl FoldScheme {
    pub fn test_folds(&self, split: usize, k: usize) -> Vec<usize> {
        match self {
            FoldScheme::RotatingPair => alloc::vec![split, (split + 1) % k],
            FoldScheme::Standard => alloc::vec![split],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub repetitions: usize,
    pub folds: usize,
    pub scheme: FoldScheme,
    pub seed: u64,
    pub r2_mode: R2Mode,
    /// Keep per-sample test predictions in the iteration records.
    pub keep_predictions: bool,
    pub cpxr: CpxrConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            folds: 10,
            scheme: FoldScheme::default(),
            seed: 0,
            r2_mode: R2Mode::default(),
            keep_predictions: false,
            cpxr: CpxrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub target: String,
    pub fold: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetIteration {
    pub target: String,
    pub train: MetricSet,
    pub test: MetricSet,
    /// Training RMSE of the plain MLR fit on the same rows.
    pub baseline_train_rmse: f64,
    pub patterns: usize,
    /// CPXR could not run on this split and the baseline was used.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub repetition: usize,
    pub split: usize,
    pub test_folds: Vec<usize>,
    pub train_count: usize,
    pub test_ids: Vec<String>,
    pub targets: Vec<TargetIteration>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub rmse: f64,
    pub rmsle: Option<f64>,
    pub r2: Option<f64>,
    /// Iterations in which R² was defined.
    pub r2_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: String,
    pub log_space: bool,
    pub train: MeanMetrics,
    pub test: MeanMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ConfigId,
    pub method: Method,
    pub seed: u64,
    pub repetitions: usize,
    pub folds: usize,
    pub scheme: FoldScheme,
    pub rows: usize,
    pub excluded: Vec<String>,
    pub iterations: usize,
    pub summary: Vec<TargetSummary>,
    pub records: Vec<IterationRecord>,
}

fn mean_metrics(sets: &[&MetricSet]) -> MeanMetrics {
    let n = sets.len().max(1) as f64;
    let rmse = sets.iter().map(|m| m.rmse).sum::<f64>() / n;
    let rmsles: Vec<f64> = sets.iter().filter_map(|m| m.rmsle).collect();
    let r2s: Vec<f64> = sets.iter().filter_map(|m| m.r2).collect();
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    MeanMetrics { rmse, rmsle: avg(&rmsles), r2: avg(&r2s), r2_count: r2s.len() }
}

/// Per-target means over the iteration records.
pub fn summarize(records: &[IterationRecord], targets: &[String], config: &ModelConfig) -> Vec<TargetSummary> {
    targets
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let train: Vec<&MetricSet> = records.iter().map(|r| &r.targets[t].train).collect();
            let test: Vec<&MetricSet> = records.iter().map(|r| &r.targets[t].test).collect();
            TargetSummary {
                target: name.clone(),
                log_space: config.log_space(name),
                train: mean_metrics(&train),
                test: mean_metrics(&test),
            }
        })
        .collect()
}

impl EvaluationReport {
    pub fn target(&self, name: &str) -> Option<&TargetSummary> {
        self.summary.iter().find(|s| s.target == name)
    }

    /// Mean test RMSE across targets.
    pub fn mean_test_rmse(&self) -> f64 {
        self.summary.iter().map(|s| s.test.rmse).sum::<f64>() / self.summary.len().max(1) as f64
    }
}

/// Fitted model for one target on one training split.
enum Fitted {
    Linear(crate::linreg::LinearModel),
    Pxr(PxrModel),
}

impl Fitted {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Fitted::Linear(m) => m.predict_row(row),
            Fitted::Pxr(m) => m.predict_row(row),
        }
    }

    fn patterns(&self) -> usize {
        match self {
            Fitted::Linear(_) => 0,
            Fitted::Pxr(m) => m.k(),
        }
    }
}

/// Repeated cross-validation of one method on one configuration. Fold
/// assignment depends only on the seed, the repetition and the number of
/// usable rows, so runs of different methods with the same seed share folds.
pub fn cross_validate<E: Executor>(
    dataset: &Dataset,
    config: &ModelConfig,
    method: Method,
    cv: &CvConfig,
    exec: &E,
) -> Result<EvaluationReport, EvalError> {
    if cv.repetitions == 0 {
        return Err(EvalError::NoRepetitions);
    }
    cv.cpxr.validate()?;
    let sel = select_columns(dataset, config)?;
    let n = sel.len();
    let k = cv.folds;
    let mut fold_sets = Vec::with_capacity(cv.repetitions);
    for r in 0..cv.repetitions {
        fold_sets.push(assign_fold_indices(n, k, cv.seed ^ r as u64)?);
    }
    let targets: Vec<Vec<f64>> = (0..sel.target_names.len()).map(|t| sel.target(t)).collect();

    let run = |index: usize| -> Result<IterationRecord, EvalError> {
        let (repetition, split) = (index / k, index % k);
        let folds = &fold_sets[repetition];
        let test_folds = cv.scheme.test_folds(split, k);
        let (test_rows, train_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| test_folds.contains(&folds[i]));
        let x_train = sel.x.select_rows(&train_rows);
        let mut out = Vec::with_capacity(targets.len());
        let mut predictions = Vec::new();
        for (t, y) in targets.iter().enumerate() {
            let name = &sel.target_names[t];
            let y_train: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
            let y_test: Vec<f64> = test_rows.iter().map(|&i| y[i]).collect();
            let (fitted, baseline_train_rmse, degraded) = match method {
                Method::Mlr => {
                    let m = fit_with_fallback(&x_train.x, &y_train, &x_train.names)?;
                    (Fitted::Linear(m), None, false)
                }
                Method::Cpxr => match train_cpxr_detailed(&x_train, &y_train, &cv.cpxr) {
                    Ok((m, s)) => (Fitted::Pxr(m), Some(s.baseline_rmse), false),
                    Err(CpxrError::TooFewRows { .. }) => {
                        let m = fit_with_fallback(&x_train.x, &y_train, &x_train.names)?;
                        (Fitted::Linear(m), None, true)
                    }
                    Err(e) => return Err(e.into()),
                },
            };
            let p_train: Vec<f64> = train_rows.iter().map(|&i| fitted.predict(sel.x.x.row(i))).collect();
            let p_test: Vec<f64> = test_rows.iter().map(|&i| fitted.predict(sel.x.x.row(i))).collect();
            let log_space = config.log_space(name);
            let train = metrics_with(&p_train, &y_train, log_space, cv.r2_mode)?;
            let test = metrics_with(&p_test, &y_test, log_space, cv.r2_mode)?;
            if cv.keep_predictions {
                for (j, &i) in test_rows.iter().enumerate() {
                    predictions.push(Prediction {
                        id: sel.ids[i].clone(),
                        target: name.clone(),
                        fold: folds[i],
                        observed: y_test[j],
                        predicted: p_test[j],
                    });
                }
            }
            out.push(TargetIteration {
                target: name.clone(),
                train,
                test,
                baseline_train_rmse: baseline_train_rmse.unwrap_or(train.rmse),
                patterns: fitted.patterns(),
                degraded,
            });
        }
        Ok(IterationRecord {
            index,
            repetition,
            split,
            test_folds,
            train_count: train_rows.len(),
            test_ids: test_rows.iter().map(|&i| sel.ids[i].clone()).collect(),
            targets: out,
            predictions,
        })
    };

    let iterations = cv.repetitions * k;
    let records = exec.map(iterations, run).into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&records, &sel.target_names, config);
    Ok(EvaluationReport {
        config: config.id,
        method,
        seed: cv.seed,
        repetitions: cv.repetitions,
        folds: k,
        scheme: cv.scheme,
        rows: n,
        excluded: sel.excluded,
        iterations,
        summary,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetComparison {
    pub target: String,
    pub log_space: bool,
    pub rmse_a: f64,
    pub rmse_b: f64,
    /// Percent by which B's test RMSE (RMSLE for log targets) is below A's.
    pub reduction_percent: f64,
    pub r2_a: Option<f64>,
    pub r2_b: Option<f64>,
}

impl TargetComparison {
    pub fn statement(&self) -> String {
        let metric = if self.log_space { "RMSLE" } else { "RMSE" };
        let pct = self.reduction_percent;
        let verb = if pct >= 0.0 { "decreased" } else { "increased" };
        format!("{}: {metric} {verb} by {:.0}% ({:.4} -> {:.4})", self.target, pct.abs(), self.rmse_a, self.rmse_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config: ConfigId,
    pub method_a: Method,
    pub method_b: Method,
    pub targets: Vec<TargetComparison>,
}

/// Percent reduction from `a` to `b`; 0 when both are 0.
pub fn reduction_percent(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        100.0 * (a - b) / a
    }
}

/// Relative change of test accuracy from report `a` to report `b`.
pub fn compare(a: &EvaluationReport, b: &EvaluationReport) -> Result<Comparison, EvalError> {
    let names = |r: &EvaluationReport| r.summary.iter().map(|s| s.target.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(EvalError::Mismatch(format!("targets {:?} vs {:?}", names(a), names(b))));
    }
    let targets = a
        .summary
        .iter()
        .zip(&b.summary)
        .map(|(sa, sb)| {
            let (ra, rb) = if sa.log_space {
                (sa.test.rmsle.unwrap_or(sa.test.rmse), sb.test.rmsle.unwrap_or(sb.test.rmse))
            } else {
                (sa.test.rmse, sb.test.rmse)
            };
            TargetComparison {
                target: sa.target.clone(),
                log_space: sa.log_space,
                rmse_a: ra,
                rmse_b: rb,
                reduction_percent: reduction_percent(ra, rb),
                r2_a: sa.test.r2,
                r2_b: sb.test.r2,
            }
        })
        .collect();
    Ok(Comparison { config: a.config, method_a: a.method, method_b: b.method, targets })
}
