//! Pattern-aided regression: training by contrast-pattern search over the
//! rows a baseline fits badly, and prediction by weighted averaging of the
//! local models whose patterns match.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::dataset::Sample;
use crate::discretize::{bin_index, bin_item, mdl_cuts, CutPoints, DiscretizationScheme};
use crate::linreg::{fit_with_fallback, LinearModel, LinregError};
use crate::math::sqrt;
use crate::matrix::DesignMatrix;
use crate::patterns::{
    filter_similar_indexed, mine_indexed, rank_order, ItemTable, MiningParams, Pattern, PatternError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpxrError {
    #[error("rho must lie in (0, 1), got {0}")]
    InvalidRho(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("need at least {min} training rows, got {n}")]
    TooFewRows { n: usize, min: usize },
    #[error("no features")]
    NoFeatures,
    #[error("{rows} rows but {targets} targets")]
    DimensionMismatch { rows: usize, targets: usize },
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error(transparent)]
    Linreg(#[from] LinregError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpxrConfig {
    /// Share of the total absolute baseline residual assigned to the large-error class.
    pub rho: f64,
    pub mining: MiningParams,
    /// Candidates whose matching rows overlap a better-ranked kept one by more
    /// than this Jaccard similarity are dropped.
    pub jaccard_max: f64,
    /// Minimum relative reduction of absolute error on the matching rows.
    pub min_error_reduction: f64,
    pub max_k: usize,
    pub max_passes: usize,
    pub weight_epsilon: f64,
    /// Local and default models need at least `max(p + 2, min_local_rows)` rows.
    pub min_local_rows: usize,
    pub bin_max_depth: usize,
    pub min_train_rows: usize,
    /// Ranked candidates kept for local fitting after the similarity filter.
    pub max_candidates: usize,
}

impl Default for CpxrConfig {
    fn default() -> Self {
        Self {
            rho: 0.45,
            mining: MiningParams::default(),
            jaccard_max: 0.9,
            min_error_reduction: 0.05,
            max_k: 7,
            max_passes: 20,
            weight_epsilon: 1e-6,
            min_local_rows: 10,
            bin_max_depth: crate::discretize::DEFAULT_MAX_DEPTH,
            min_train_rows: 30,
            max_candidates: 200,
        }
    }
}

impl CpxrConfig {
    pub fn validate(&self) -> Result<(), CpxrError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(CpxrError::InvalidRho(self.rho));
        }
        self.mining.validate()?;
        if !(0.0..=1.0).contains(&self.jaccard_max) {
            return Err(CpxrError::InvalidConfig("jaccard_max must lie in [0, 1]"));
        }
        if !(self.weight_epsilon > 0.0) {
            return Err(CpxrError::InvalidConfig("weight_epsilon must be positive"));
        }
        if !self.min_error_reduction.is_finite() {
            return Err(CpxrError::InvalidConfig("min_error_reduction must be finite"));
        }
        Ok(())
    }

    fn local_floor(&self, p: usize) -> usize {
        (p + 2).max(self.min_local_rows)
    }
}

/// Large-error / small-error partition of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    pub le_ids: Vec<String>,
    pub se_ids: Vec<String>,
    pub rho: f64,
}

/// Positions in the large-error class: the shortest prefix, by descending
/// |residual| (ties by position), whose absolute residuals sum to at least
/// `rho` of the total. Empty when every residual is zero.
pub fn large_error_rows(residuals: &[f64], rho: f64) -> Result<Vec<usize>, CpxrError> {
    large_error_rows_by(residuals, rho, |a, b| a.cmp(&b))
}

fn large_error_rows_by(
    residuals: &[f64],
    rho: f64,
    tie: impl Fn(usize, usize) -> Ordering,
) -> Result<Vec<usize>, CpxrError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CpxrError::InvalidRho(rho));
    }
    let total: f64 = residuals.iter().map(|r| r.abs()).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[b].abs().total_cmp(&residuals[a].abs()).then_with(|| tie(a, b)));
    let target = rho * total;
    let mut acc = 0.0;
    let mut le = Vec::new();
    for i in order {
        le.push(i);
        acc += residuals[i].abs();
        if acc >= target {
            break;
        }
    }
    Ok(le)
}

/// Splits `(id, residual)` pairs; ties in |residual| put the larger id last.
pub fn split_le_se(residuals: &[(String, f64)], rho: f64) -> Result<ErrorSplit, CpxrError> {
    let values: Vec<f64> = residuals.iter().map(|(_, r)| *r).collect();
    let le = large_error_rows_by(&values, rho, |a, b| residuals[a].0.cmp(&residuals[b].0))?;
    let mut in_le = alloc::vec![false; residuals.len()];
    for &i in &le {
        in_le[i] = true;
    }
    Ok(ErrorSplit {
        le_ids: le.iter().map(|&i| residuals[i].0.clone()).collect(),
        se_ids: residuals.iter().zip(&in_le).filter(|(_, &l)| !l).map(|((id, _), _)| id.clone()).collect(),
        rho,
    })
}

/// Weight of a local model: its relative reduction of absolute error over the
/// baseline on the matching rows, floored at `epsilon`.
pub fn local_weight(baseline_abs_error: f64, local_abs_error: f64, epsilon: f64) -> f64 {
    if !(baseline_abs_error > 0.0) {
        return epsilon;
    }
    let r = (baseline_abs_error - local_abs_error) / baseline_abs_error;
    if r > epsilon {
        r
    } else {
        epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternModel {
    pub pattern: Pattern,
    pub model: LinearModel,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PxrModel {
    pub features: Vec<String>,
    pub pairs: Vec<PatternModel>,
    pub default_model: LinearModel,
    pub baseline: LinearModel,
    pub scheme: DiscretizationScheme,
}

impl PxrModel {
    /// The k = 0 model that predicts with `baseline` everywhere.
    pub fn from_baseline(baseline: LinearModel) -> Self {
        Self {
            features: baseline.features().to_vec(),
            pairs: Vec::new(),
            default_model: baseline.clone(),
            baseline,
            scheme: DiscretizationScheme::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn predict_with(&self, mut value: impl FnMut(&str) -> Option<f64>) -> Result<f64, CpxrError> {
        let mut row = Vec::with_capacity(self.features.len());
        for f in &self.features {
            row.push(value(f).ok_or_else(|| CpxrError::MissingFeature(f.clone()))?);
        }
        Ok(self.predict_row(&row))
    }

    pub fn predict_sample(&self, sample: &Sample) -> Result<f64, CpxrError> {
        self.predict_with(|f| sample.value(f))
    }

    /// Prediction for a row in `features` order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let lookup = |name: &str| self.features.iter().position(|f| f == name).map(|i| row[i]);
        let mut num = 0.0;
        let mut den = 0.0;
        for pair in &self.pairs {
            if pair.pattern.matches_with(lookup) == Some(true) {
                num += pair.weight * pair.model.predict_row(row);
                den += pair.weight;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            self.default_model.predict_row(row)
        }
    }

    pub fn predict_design(&self, x: &DesignMatrix) -> Result<Vec<f64>, CpxrError> {
        if x.names != self.features {
            let missing = self.features.iter().find(|f| !x.names.contains(f));
            return Err(CpxrError::MissingFeature(missing.cloned().unwrap_or_default()));
        }
        Ok((0..x.x.nrows()).map(|r| self.predict_row(x.x.row(r))).collect())
    }
}

/// Free-standing evaluation of the weighted-mean rule.
pub fn pxr_predict(model: &PxrModel, sample: &Sample) -> Result<f64, CpxrError> {
    model.predict_sample(sample)
}

/// A local model as seen by the pattern-set search: the rows its pattern
/// matches, its predictions on every training row, and its weight.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub rows: BitSet,
    pub predictions: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSetSearch {
    /// Chosen candidate indices in position order.
    pub chosen: Vec<usize>,
    pub objective: f64,
    /// Objective after the empty set and after every accepted move.
    pub trace: Vec<f64>,
}

/// Total absolute error of the weighted-mean rule for a set of candidates,
/// with `fallback` predicting the rows no candidate matches.
pub fn set_objective(set: &[usize], candidates: &[Candidate], fallback: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for r in 0..y.len() {
        let mut num = 0.0;
        let mut den = 0.0;
        for &c in set {
            let cand = &candidates[c];
            if cand.rows.contains(r) {
                num += cand.weight * cand.predictions[r];
                den += cand.weight;
            }
        }
        let pred = if den > 0.0 { num / den } else { fallback[r] };
        total += (y[r] - pred).abs();
    }
    total
}

/// Greedy forward selection up to `max_k` candidates followed by swap passes
/// that replace a member by the best unused candidate whenever that strictly
/// lowers total absolute error. Stops after a pass without swaps or after
/// `max_passes`.
pub fn optimize_pattern_set(
    candidates: &[Candidate],
    fallback: &[f64],
    y: &[f64],
    max_k: usize,
    max_passes: usize,
) -> PatternSetSearch {
    let mut chosen: Vec<usize> = Vec::new();
    let mut current = set_objective(&chosen, candidates, fallback, y);
    let mut trace = alloc::vec![current];
    let mut used = alloc::vec![false; candidates.len()];

    while chosen.len() < max_k {
        let mut best: Option<(f64, usize)> = None;
        let mut trial = chosen.clone();
        trial.push(0);
        for c in (0..candidates.len()).filter(|&c| !used[c]) {
            *trial.last_mut().unwrap() = c;
            let obj = set_objective(&trial, candidates, fallback, y);
            if best.is_none_or(|(b, _)| obj < b) {
                best = Some((obj, c));
            }
        }
        match best {
            Some((obj, c)) if obj < current => {
                chosen.push(c);
                used[c] = true;
                current = obj;
                trace.push(current);
            }
            _ => break,
        }
    }

    for _ in 0..max_passes {
        let mut swapped = false;
        for pos in 0..chosen.len() {
            let mut best: Option<(f64, usize)> = None;
            let mut trial = chosen.clone();
            for c in (0..candidates.len()).filter(|&c| !used[c]) {
                trial[pos] = c;
                let obj = set_objective(&trial, candidates, fallback, y);
                if best.is_none_or(|(b, _)| obj < b) {
                    best = Some((obj, c));
                }
            }
            if let Some((obj, c)) = best {
                if obj < current {
                    used[chosen[pos]] = false;
                    used[c] = true;
                    chosen[pos] = c;
                    current = obj;
                    trace.push(current);
                    swapped = true;
                }
            }
        }
        if !swapped {
            break;
        }
    }
    PatternSetSearch { chosen, objective: current, trace }
}

/// Counters and traces from one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub rows: usize,
    pub le_rows: usize,
    pub mined: usize,
    pub after_similarity: usize,
    pub fitted: usize,
    pub objective_trace: Vec<f64>,
    pub baseline_rmse: f64,
    pub train_rmse: f64,
    /// The searched pattern set had higher RMSE than the baseline and was dropped.
    pub fell_back: bool,
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(y).map(|(p, o)| (p - o) * (p - o)).sum();
    sqrt(sse / y.len() as f64)
}

fn abs_error(rows: impl Iterator<Item = usize>, pred: &[f64], y: &[f64]) -> f64 {
    rows.map(|r| (y[r] - pred[r]).abs()).sum()
}

pub fn train_cpxr(x: &DesignMatrix, y: &[f64], config: &CpxrConfig) -> Result<PxrModel, CpxrError> {
    train_cpxr_detailed(x, y, config).map(|(m, _)| m)
}

pub fn train_cpxr_detailed(
    x: &DesignMatrix,
    y: &[f64],
    config: &CpxrConfig,
) -> Result<(PxrModel, TrainingSummary), CpxrError> {
    config.validate()?;
    let (n, p) = (x.x.nrows(), x.x.ncols());
    if n != y.len() {
        return Err(CpxrError::DimensionMismatch { rows: n, targets: y.len() });
    }
    if p == 0 {
        return Err(CpxrError::NoFeatures);
    }
    if n < config.min_train_rows {
        return Err(CpxrError::TooFewRows { n, min: config.min_train_rows });
    }

    let baseline = fit_with_fallback(&x.x, y, &x.names)?;
    let base_pred = baseline.predict_matrix(&x.x);
    let baseline_rmse = rmse(&base_pred, y);
    let residuals: Vec<f64> = y.iter().zip(&base_pred).map(|(o, p)| o - p).collect();
    let mut summary = TrainingSummary {
        rows: n,
        le_rows: 0,
        mined: 0,
        after_similarity: 0,
        fitted: 0,
        objective_trace: Vec::new(),
        baseline_rmse,
        train_rmse: baseline_rmse,
        fell_back: false,
    };
    let baseline_only = |summary: TrainingSummary| Ok((PxrModel::from_baseline(baseline.clone()), summary));

    let le_rows = large_error_rows(&residuals, config.rho)?;
    summary.le_rows = le_rows.len();
    if le_rows.is_empty() {
        return baseline_only(summary);
    }
    let le = BitSet::from_indices(n, le_rows.iter().copied());
    let labels: Vec<bool> = (0..n).map(|r| le.contains(r)).collect();
    let mut se = BitSet::new(n);
    for r in (0..n).filter(|&r| !labels[r]) {
        se.insert(r);
    }

    let mut scheme = DiscretizationScheme::new();
    let mut table = ItemTable::new(n);
    for (j, name) in x.names.iter().enumerate() {
        let column = x.x.column(j);
        let cuts = mdl_cuts(&column, &labels, config.bin_max_depth);
        if !cuts.is_empty() {
            let mut bins: Vec<BitSet> = (0..=cuts.len()).map(|_| BitSet::new(n)).collect();
            for (r, &v) in column.iter().enumerate() {
                bins[bin_index(&cuts, v)].insert(r);
            }
            for (b, rows) in bins.into_iter().enumerate() {
                table.push(bin_item(name, &cuts, b), j, rows);
            }
        }
        scheme.insert_cuts(CutPoints { feature: name.clone(), cuts });
    }

    let mined = if table.items.is_empty() { Vec::new() } else { mine_indexed(&table, &le, &se, &config.mining)? };
    summary.mined = mined.len();
    let patterns: Vec<Pattern> = mined.iter().map(|m| table.pattern(&m.items)).collect();
    let mut order: Vec<usize> = (0..mined.len()).collect();
    order.sort_by(|&a, &b| rank_order((&patterns[a], &mined[a].stats), (&patterns[b], &mined[b].stats)));
    let mds: Vec<BitSet> = mined.iter().map(|m| m.mds.clone()).collect();
    let mut kept = filter_similar_indexed(&order, &mds, config.jaccard_max);
    summary.after_similarity = kept.len();
    kept.truncate(config.max_candidates);

    let floor = config.local_floor(p);
    let mut candidates = Vec::new();
    let mut candidate_models = Vec::new();
    for &c in &kept {
        let rows: Vec<usize> = mds[c].iter().collect();
        if rows.len() < floor {
            continue;
        }
        let sub_y: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let local = match fit_with_fallback(&x.x.select_rows(&rows), &sub_y, &x.names) {
            Ok(m) => m,
            Err(LinregError::NonFinite) => continue,
            Err(e) => return Err(e.into()),
        };
        let predictions = local.predict_matrix(&x.x);
        let e0 = abs_error(rows.iter().copied(), &base_pred, y);
        let ei = abs_error(rows.iter().copied(), &predictions, y);
        if !(e0 > 0.0) || (e0 - ei) / e0 < config.min_error_reduction {
            continue;
        }
        let weight = local_weight(e0, ei, config.weight_epsilon);
        candidates.push(Candidate { rows: mds[c].clone(), predictions, weight });
        candidate_models.push((patterns[c].clone(), local));
    }
    summary.fitted = candidates.len();
    if candidates.is_empty() {
        return baseline_only(summary);
    }

    let search = optimize_pattern_set(&candidates, &base_pred, y, config.max_k, config.max_passes);
    summary.objective_trace = search.trace.clone();
    if search.chosen.is_empty() {
        return baseline_only(summary);
    }

    let mut covered = BitSet::new(n);
    for &c in &search.chosen {
        for r in candidates[c].rows.iter() {
            covered.insert(r);
        }
    }
    let unmatched: Vec<usize> = (0..n).filter(|&r| !covered.contains(r)).collect();
    let default_model = if unmatched.len() >= floor {
        let sub_y: Vec<f64> = unmatched.iter().map(|&r| y[r]).collect();
        match fit_with_fallback(&x.x.select_rows(&unmatched), &sub_y, &x.names) {
            Ok(m) => m,
            Err(LinregError::NonFinite) => baseline.clone(),
            Err(e) => return Err(e.into()),
        }
    } else {
        baseline.clone()
    };

    let model = PxrModel {
        features: x.names.clone(),
        pairs: search
            .chosen
            .iter()
            .map(|&c| PatternModel {
                pattern: candidate_models[c].0.clone(),
                model: candidate_models[c].1.clone(),
                weight: candidates[c].weight,
            })
            .collect(),
        default_model,
        baseline: baseline.clone(),
        scheme,
    };
    let train_pred = model.predict_design(x)?;
    let train_rmse = rmse(&train_pred, y);
    if !(train_rmse <= baseline_rmse) {
        summary.fell_back = true;
        return baseline_only(summary);
    }
    summary.train_rmse = train_rmse;
    Ok((model, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::patterns::Item;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(v: &[f64]) -> Vec<(String, f64)> {
        v.iter().enumerate().map(|(i, &r)| (alloc::format!("s{i}"), r)).collect()
    }

    #[test]
    fn split_examples() {
        let s = split_le_se(&ids(&[5.0, 3.0, 1.0, 1.0]), 0.45).unwrap();
        assert_eq!(s.le_ids, vec!["s0"]);
        assert_eq!(s.se_ids, vec!["s1", "s2", "s3"]);
        let s = split_le_se(&ids(&[1.0, -1.0, 1.0, 1.0]), 0.45).unwrap();
        assert_eq!(s.le_ids, vec!["s0", "s1"]);
        let s = split_le_se(&ids(&[0.0; 4]), 0.45).unwrap();
        assert!(s.le_ids.is_empty());
        assert_eq!(s.se_ids.len(), 4);
        assert!(split_le_se(&ids(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn split_ties_put_larger_id_last() {
        let r = vec![("b".to_string(), 1.0), ("a".to_string(), 1.0), ("c".to_string(), 1.0)];
        assert_eq!(split_le_se(&r, 0.3).unwrap().le_ids, vec!["a"]);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(local_weight(10.0, 0.0, 1e-6), 1.0);
        assert_eq!(local_weight(10.0, 12.0, 1e-6), 1e-6);
        assert!((local_weight(10.0, 4.0, 1e-6) - 0.6).abs() < 1e-15);
    }

    fn constant_model(v: f64) -> LinearModel {
        LinearModel::from_coefficients(vec!["x".into()], v, vec![0.0])
    }

    fn threshold(lo: Option<f64>, hi: Option<f64>) -> Pattern {
        Pattern::new(vec![Item::interval("x", lo, hi)]).unwrap()
    }

    fn two_pattern_model() -> PxrModel {
        let mut m = PxrModel::from_baseline(constant_model(0.0));
        m.default_model = constant_model(3.0);
        m.pairs = vec![
            PatternModel { pattern: threshold(None, Some(10.0)), model: constant_model(4.0), weight: 1.0 },
            PatternModel { pattern: threshold(Some(5.0), None), model: constant_model(8.0), weight: 3.0 },
        ];
        m
    }

    #[test]
    fn prediction_examples() {
        let m = two_pattern_model();
        assert_eq!(m.predict_row(&[20.0]), 8.0);
        assert_eq!(m.predict_row(&[7.0]), 7.0);
        assert_eq!(m.predict_row(&[1.0]), 4.0);
        let mut none = m.clone();
        none.pairs.clear();
        assert_eq!(none.predict_row(&[7.0]), 3.0);
        assert_eq!(pxr_predict(&m, &Sample::new("a")), Err(CpxrError::MissingFeature("x".into())));
    }

    #[test]
    fn weight_scaling_leaves_predictions() {
        let m = two_pattern_model();
        let mut scaled = m.clone();
        for p in &mut scaled.pairs {
            p.weight *= 2.0;
        }
        for v in [1.0, 7.0, 20.0] {
            assert_eq!(m.predict_row(&[v]), scaled.predict_row(&[v]));
        }
    }

    fn crafted() -> (Vec<Candidate>, Vec<f64>, Vec<f64>) {
        // Four groups of ten rows; the baseline is off by 1 everywhere.
        let n = 40;
        let y: Vec<f64> = (0..n).map(|r| r as f64 * 0.1).collect();
        let fallback: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        let group = |g: &[usize]| BitSet::from_indices(n, g.iter().flat_map(|&g| g * 10..g * 10 + 10));
        // A: perfect on groups 0,1 and off by 0.5 on group 2.
        let a_pred: Vec<f64> = (0..n).map(|r| if r / 10 == 2 { y[r] + 0.5 } else { y[r] }).collect();
        let cands = vec![
            Candidate { rows: group(&[0, 1, 2]), predictions: a_pred, weight: 1.0 },
            Candidate { rows: group(&[0, 3]), predictions: y.clone(), weight: 1.0 },
            Candidate { rows: group(&[1, 2]), predictions: y.clone(), weight: 1.0 },
        ];
        (cands, fallback, y)
    }

    #[test]
    fn swap_pass_finds_best_pair() {
        let (cands, fallback, y) = crafted();
        let greedy = optimize_pattern_set(&cands, &fallback, &y, 2, 0);
        assert_eq!(greedy.chosen, vec![0, 1]);
        let s = optimize_pattern_set(&cands, &fallback, &y, 2, 20);
        let mut oracle: Option<(f64, [usize; 2])> = None;
        for a in 0..3 {
            for b in a + 1..3 {
                let obj = set_objective(&[a, b], &cands, &fallback, &y);
                if oracle.is_none_or(|(o, _)| obj < o) {
                    oracle = Some((obj, [a, b]));
                }
            }
        }
        let (best, pair) = oracle.unwrap();
        assert_eq!(pair, [1, 2]);
        let mut got = s.chosen.clone();
        got.sort();
        assert_eq!(got, pair);
        assert_eq!(s.objective, best);
        assert!(s.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn single_and_duplicate_candidates() {
        let (cands, fallback, y) = crafted();
        let one = optimize_pattern_set(&cands[1..2], &fallback, &y, 7, 20);
        assert_eq!(one.chosen, vec![0]);
        let dup = vec![cands[1].clone(), cands[1].clone()];
        let s = optimize_pattern_set(&dup, &fallback, &y, 7, 20);
        assert_eq!(s.chosen, vec![0]);
        assert_eq!(s.trace.len(), 2);
    }

    fn design(rows: &[(f64, f64)]) -> DesignMatrix {
        let data: Vec<f64> = rows.iter().flat_map(|&(x, z)| [x, z]).collect();
        DesignMatrix::new(vec!["x".into(), "z".into()], Matrix::from_row_major(rows.len(), 2, data))
    }

    #[test]
    fn linear_target_gives_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<(f64, f64)> = (0..60).map(|_| (rng.random::<f64>() * 10.0, rng.random::<f64>())).collect();
        let y: Vec<f64> = rows.iter().map(|&(x, z)| 1.0 + 2.0 * x - 3.0 * z).collect();
        let x = design(&rows);
        let (model, summary) = train_cpxr_detailed(&x, &y, &CpxrConfig::default()).unwrap();
        assert!(summary.baseline_rmse < 1e-12);
        assert!(model.k() == 0 || summary.train_rmse <= summary.baseline_rmse);
    }

    #[test]
    fn exact_zero_residuals_give_empty_split() {
        let rows: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, (i % 2) as f64)).collect();
        let y: Vec<f64> = rows.iter().map(|&(x, z)| 2.0 * x + 4.0 * z).collect();
        let (model, summary) = train_cpxr_detailed(&design(&rows), &y, &CpxrConfig::default()).unwrap();
        if summary.le_rows == 0 {
            assert_eq!(model.k(), 0);
        }
    }

    // z is a 0/1 indicator with one row in five in the second regime, so the
    // large-error rows are exactly that regime.
    fn two_regime(seed: u64, n: usize) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random::<f64>() * 10.0, if rng.random::<f64>() < 0.8 { 0.0 } else { 1.0 })).collect();
        let y = rows.iter().map(|&(x, z)| if z < 0.5 { 2.0 * x } else { -2.0 * x + 10.0 }).collect();
        (design(&rows), y)
    }

    #[test]
    fn two_regimes_are_separated() {
        let (x, y) = two_regime(11, 200);
        let (model, s) = train_cpxr_detailed(&x, &y, &CpxrConfig::default()).unwrap();
        assert!(model.k() >= 1);
        assert!(s.train_rmse < 0.05 * s.baseline_rmse, "{s:?}");
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let (x, y) = two_regime(5, 120);
        let a = train_cpxr(&x, &y, &CpxrConfig::default()).unwrap();
        let b = train_cpxr(&x, &y, &CpxrConfig::default()).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: PxrModel = serde_json::from_str(&json).unwrap();
        assert_eq!(json, serde_json::to_string(&back).unwrap());
        for r in 0..x.x.nrows() {
            assert_eq!(a.predict_row(x.x.row(r)).to_bits(), back.predict_row(x.x.row(r)).to_bits());
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let (x, y) = two_regime(1, 20);
        assert_eq!(train_cpxr(&x, &y, &CpxrConfig::default()), Err(CpxrError::TooFewRows { n: 20, min: 30 }));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn never_worse_than_baseline(seed in 0u64..10_000, noise in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<(f64, f64)> = (0..60).map(|_| (rng.random::<f64>() * 10.0, rng.random::<f64>())).collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|&(x, z)| if x * z > 3.0 { x } else { -x } + noise * (rng.random::<f64>() - 0.5))
                .collect();
            let (_, s) = train_cpxr_detailed(&design(&rows), &y, &CpxrConfig::default()).unwrap();
            proptest::prop_assert!(s.train_rmse <= s.baseline_rmse);
            proptest::prop_assert!(s.objective_trace.windows(2).all(|w| w[1] < w[0]));
        }
    }
}
