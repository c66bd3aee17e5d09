//! Supervised entropy discretization with the Fayyad–Irani MDL stopping
//! rule, and the schemes that turn numeric features into items.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::math::{log2, powf};
use crate::patterns::{Item, ItemKind};

/// Recursion depth cap: at most `2^3 = 8` bins per feature.
pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizeError {
    #[error("feature `{0}` is not covered by the discretization scheme")]
    FeatureNotInScheme(String),
    #[error("sample `{id}` has no value for `{feature}`")]
    MissingValue { id: String, feature: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPoints {
    pub feature: String,
    pub cuts: Vec<f64>,
}

/// Shannon entropy (bits) of a class-count vector.
pub(crate) fn entropy(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * log2(p)
        })
        .sum()
}

fn classes_present(counts: &[usize]) -> usize {
    counts.iter().filter(|&&c| c > 0).count()
}

/// Whether the MDL principle accepts splitting `n` rows with class
/// counts `total` into `left` / `right`. Returns the information gain when
/// accepted.
pub fn mdl_accepts(total: &[usize], left: &[usize], right: &[usize]) -> Option<f64> {
    let n: usize = total.iter().sum();
    let n1: usize = left.iter().sum();
    let n2: usize = right.iter().sum();
    if n < 2 || n1 == 0 || n2 == 0 {
        return None;
    }
    let ent = entropy(total, n);
    let ent1 = entropy(left, n1);
    let ent2 = entropy(right, n2);
    let nf = n as f64;
    let gain = ent - (n1 as f64 / nf) * ent1 - (n2 as f64 / nf) * ent2;
    let c = classes_present(total) as f64;
    let c1 = classes_present(left) as f64;
    let c2 = classes_present(right) as f64;
    let delta = log2(powf(3.0, c) - 2.0) - (c * ent - c1 * ent1 - c2 * ent2);
    let threshold = (log2(nf - 1.0) + delta) / nf;
    (gain > threshold).then_some(gain)
}

/// Midpoint between two distinct adjacent values, nudged so the lower value
/// stays strictly below the cut.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid <= a {
        b
    } else {
        mid
    }
}

struct Splitter {
    n_classes: usize,
    max_depth: usize,
    cuts: Vec<f64>,
}

impl Splitter {
    /// `rows` is sorted by value.
    fn split(&mut self, rows: &[(f64, usize)], depth: usize) {
        let n = rows.len();
        if n < 2 || depth >= self.max_depth {
            return;
        }
        let mut total = alloc::vec![0usize; self.n_classes];
        for &(_, c) in rows {
            total[c] += 1;
        }
        if classes_present(&total) < 2 {
            return;
        }

        // Runs of equal values; each run is either pure (Some(class)) or mixed.
        let mut runs: Vec<(usize, usize, Option<usize>)> = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || rows[i].0 != rows[start].0 {
                let first = rows[start].1;
                let pure = rows[start..i].iter().all(|&(_, c)| c == first);
                runs.push((start, i, pure.then_some(first)));
                start = i;
            }
        }
        if runs.len() < 2 {
            return;
        }

        let nf = n as f64;
        let mut left = alloc::vec![0usize; self.n_classes];
        let mut best: Option<(f64, usize)> = None;
        for w in 0..runs.len() - 1 {
            let (s, e, class_a) = runs[w];
            for &(_, c) in &rows[s..e] {
                left[c] += 1;
            }
            let class_b = runs[w + 1].2;
            if class_a.is_some() && class_a == class_b {
                continue;
            }
            let n1 = e;
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let weighted = (n1 as f64 / nf) * entropy(&left, n1) + ((n - n1) as f64 / nf) * entropy(&right, n - n1);
            if best.is_none_or(|(b, _)| weighted < b) {
                best = Some((weighted, e));
            }
        }
        let Some((_, split_at)) = best else { return };

        let mut lc = alloc::vec![0usize; self.n_classes];
        for &(_, c) in &rows[..split_at] {
            lc[c] += 1;
        }
        let rc: Vec<usize> = total.iter().zip(&lc).map(|(t, l)| t - l).collect();
        if mdl_accepts(&total, &lc, &rc).is_none() {
            return;
        }
        self.cuts.push(midpoint(rows[split_at - 1].0, rows[split_at].0));
        self.split(&rows[..split_at], depth + 1);
        self.split(&rows[split_at..], depth + 1);
    }
}

/// Recursive binary entropy splitting at class-boundary midpoints; a split is
/// kept iff it passes the MDL criterion. Returns strictly increasing cuts.
///
/// Labels can be any ordered tag type; the number of classes is the number
/// of distinct tags present. Non-finite values are ignored.
pub fn mdl_cuts<L: Ord + Copy>(values: &[f64], labels: &[L], max_depth: usize) -> Vec<f64> {
    assert_eq!(values.len(), labels.len(), "one label per value");
    let classes: BTreeSet<L> = labels.iter().copied().collect();
    let index: BTreeMap<L, usize> = classes.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut rows: Vec<(f64, usize)> =
        values.iter().zip(labels).filter(|(v, _)| v.is_finite()).map(|(&v, l)| (v, index[l])).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut splitter = Splitter { n_classes: classes.len().max(1), max_depth, cuts: Vec::new() };
    splitter.split(&rows, 0);
    let mut cuts = splitter.cuts;
    cuts.sort_by(f64::total_cmp);
    cuts
}

pub fn mdl_discretize<L: Ord + Copy>(feature: &str, values: &[f64], labels: &[L]) -> CutPoints {
    CutPoints { feature: feature.into(), cuts: mdl_cuts(values, labels, DEFAULT_MAX_DEPTH) }
}

/// Index of the half-open bin `[cut[b-1], cut[b])` containing `v`.
#[inline]
pub fn bin_index(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c <= v)
}

/// The interval item for bin `b` of a cut list; outer bins are open-ended.
pub fn bin_item(feature: &str, cuts: &[f64], b: usize) -> Item {
    let lo = if b == 0 { None } else { Some(cuts[b - 1]) };
    let hi = cuts.get(b).copied();
    Item::interval(feature, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CategoricalMarker {
    #[serde(rename = "categorical")]
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binning {
    Cuts(Vec<f64>),
    Categorical(CategoricalMarker),
}

/// Per-feature binning. Serializes as `{feature: [cuts...]}`, with
/// categorical features written as `"categorical"`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscretizationScheme {
    bins: BTreeMap<String, Binning>,
}

impl DiscretizationScheme {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_cuts(&mut self, cuts: CutPoints) {
        self.bins.insert(cuts.feature, Binning::Cuts(cuts.cuts));
    }

    pub fn insert_categorical(&mut self, feature: &str) {
        self.bins.insert(feature.into(), Binning::Categorical(CategoricalMarker::Categorical));
    }

    pub fn get(&self, feature: &str) -> Option<&Binning> {
        self.bins.get(feature)
    }

    pub fn cuts(&self, feature: &str) -> Option<&[f64]> {
        match self.bins.get(feature)? {
            Binning::Cuts(c) => Some(c),
            Binning::Categorical(_) => None,
        }
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.bins.keys().map(String::as_str)
    }

    /// The item for one feature value.
    pub fn item_for(&self, feature: &str, value: f64) -> Result<Item, DiscretizeError> {
        match self.bins.get(feature) {
            None => Err(DiscretizeError::FeatureNotInScheme(feature.into())),
            Some(Binning::Cuts(cuts)) => Ok(bin_item(feature, cuts, bin_index(cuts, value))),
            Some(Binning::Categorical(_)) => Ok(Item::equals(feature, value)),
        }
    }
}

/// One item per feature of the sample: the interval containing its value for
/// numeric features, an equality item for categorical ones.
pub fn itemize(scheme: &DiscretizationScheme, sample: &Sample) -> Result<Vec<Item>, DiscretizeError> {
    sample.features.iter().map(|(feature, &v)| scheme.item_for(feature, v)).collect()
}

/// Every item the scheme can produce for a feature, in bin order. Only
/// numeric features have a finite alphabet.
pub fn feature_items(scheme: &DiscretizationScheme, feature: &str) -> Vec<Item> {
    match scheme.get(feature) {
        Some(Binning::Cuts(cuts)) => (0..=cuts.len()).map(|b| bin_item(feature, cuts, b)).collect(),
        _ => Vec::new(),
    }
}

impl Item {
    pub fn is_unbounded(&self) -> bool {
        matches!(self.kind, ItemKind::Interval { lo: None, hi: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn four_point_example_cut() {
        let cuts = mdl_cuts(&[1.0, 2.0, 3.0, 4.0], &[0u8, 0, 1, 1], DEFAULT_MAX_DEPTH);
        assert_eq!(cuts, vec![2.5]);
        // gain 1.0 vs threshold (log2 3 + log2 7 - 2) / 4
        let threshold = (log2(3.0) + log2(7.0) - 2.0) / 4.0;
        assert!((threshold - 0.598).abs() < 1e-3);
        assert_eq!(mdl_accepts(&[2, 2], &[2, 0], &[0, 2]), Some(1.0));
    }

    #[test]
    fn pure_labels_and_constant_values_give_no_cuts() {
        assert!(mdl_cuts(&[1.0, 2.0, 3.0, 4.0], &[1u8, 1, 1, 1], 3).is_empty());
        assert!(mdl_cuts(&[5.0; 6], &[0u8, 1, 0, 1, 0, 1], 3).is_empty());
        assert!(mdl_cuts(&[1.0], &[0u8], 3).is_empty());
        assert!(mdl_cuts::<u8>(&[], &[], 3).is_empty());
    }

    #[test]
    fn depth_cap_limits_bins() {
        // Alternating blocks of 6 give many class boundaries.
        let values: Vec<f64> = (0..96).map(f64::from).collect();
        let labels: Vec<u8> = (0..96).map(|i| ((i / 6) % 2) as u8).collect();
        let cuts = mdl_cuts(&values, &labels, DEFAULT_MAX_DEPTH);
        assert!(cuts.len() <= 7, "{cuts:?}");
        let deep = mdl_cuts(&values, &labels, 10);
        assert!(deep.len() >= cuts.len());
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn itemize_table1_values() {
        let mut scheme = DiscretizationScheme::new();
        scheme.insert_cuts(CutPoints { feature: "sand".into(), cuts: vec![82.0, 86.0] });
        scheme.insert_categorical("clay");
        let sample = Sample::new("1").with_feature("sand", 83.0).with_feature("clay", 3.0);
        let items = itemize(&scheme, &sample).unwrap();
        assert_eq!(items[0], Item::equals("clay", 3.0));
        assert_eq!(items[1], Item::interval("sand", Some(82.0), Some(86.0)));
        let stray = Sample::new("x").with_feature("silt", 1.0);
        assert_eq!(itemize(&scheme, &stray), Err(DiscretizeError::FeatureNotInScheme("silt".into())));
    }

    #[test]
    fn zero_cut_feature_gives_all_range_item() {
        let mut scheme = DiscretizationScheme::new();
        scheme.insert_cuts(CutPoints { feature: "bd".into(), cuts: vec![] });
        let item = scheme.item_for("bd", 1.4).unwrap();
        assert!(item.is_unbounded());
        assert_eq!(feature_items(&scheme, "bd").len(), 1);
    }

    #[test]
    fn scheme_json_shape() {
        let mut scheme = DiscretizationScheme::new();
        scheme.insert_cuts(CutPoints { feature: "sand".into(), cuts: vec![82.0, 86.0] });
        scheme.insert_categorical("clay");
        let json = serde_json::to_string(&scheme).unwrap();
        assert_eq!(json, r#"{"clay":"categorical","sand":[82.0,86.0]}"#);
        let back: DiscretizationScheme = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scheme);
    }

    proptest::proptest! {
        #[test]
        fn each_value_lies_in_exactly_one_bin(
            cuts in proptest::collection::btree_set(-1000i32..1000, 0..7),
            v in -2000.0f64..2000.0,
        ) {
            let cuts: Vec<f64> = cuts.into_iter().map(f64::from).collect();
            let items = feature_items_from(&cuts);
            let hits = items.iter().filter(|it| it.matches_value(v)).count();
            proptest::prop_assert_eq!(hits, 1);
        }

        #[test]
        fn shift_moves_cuts(
            data in proptest::collection::vec((0i32..40, 0u8..2), 2..30),
            shift in -500i32..500,
        ) {
            let values: Vec<f64> = data.iter().map(|&(v, _)| f64::from(v)).collect();
            let labels: Vec<u8> = data.iter().map(|&(_, l)| l).collect();
            let shifted: Vec<f64> = values.iter().map(|v| v + f64::from(shift)).collect();
            let a = mdl_cuts(&values, &labels, 3);
            let b = mdl_cuts(&shifted, &labels, 3);
            proptest::prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x + f64::from(shift) - y).abs() < 1e-9);
            }
        }
    }

    fn feature_items_from(cuts: &[f64]) -> Vec<Item> {
        (0..=cuts.len()).map(|b| bin_item("f", cuts, b)).collect()
    }
}
