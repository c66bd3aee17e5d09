//! Items, patterns, matching datasets and contrast-pattern mining.
//!
//! An item is a condition on a single feature, either interval membership
//! `lo <= v < hi` or equality `v == a`. A pattern is a conjunction of items
//! with at most one item per feature. Mining is level-wise (Apriori style):
//! support in the large-error class is anti-monotone in pattern length, so
//! infrequent patterns are never extended.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::dataset::{Dataset, Sample};
use crate::discretize::{feature_items, Binning, DiscretizationScheme};
use crate::math::ceil;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("a pattern needs at least one item")]
    Empty,
    #[error("pattern has more than one item on feature `{0}`")]
    DuplicateFeature(String),
    #[error("interval item on `{0}` needs lo < hi")]
    EmptyInterval(String),
    #[error("sample `{id}` has no value for `{feature}`")]
    MissingValue { id: String, feature: String },
    #[error("the large-error class is empty")]
    EmptyLeClass,
    #[error("mining parameters must be positive")]
    InvalidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemKind {
    // Listed first: untagged decoding would otherwise read `{"value": ..}`
    // as an unbounded interval.
    Equals {
        value: f64,
    },
    /// `lo <= v < hi`; `None` is an open end.
    Interval {
        lo: Option<f64>,
        hi: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub feature: String,
    #[serde(flatten)]
    pub kind: ItemKind,
}

impl Item {
    pub fn interval(feature: &str, lo: Option<f64>, hi: Option<f64>) -> Self {
        Self { feature: feature.into(), kind: ItemKind::Interval { lo, hi } }
    }

    pub fn equals(feature: &str, value: f64) -> Self {
        Self { feature: feature.into(), kind: ItemKind::Equals { value } }
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if let ItemKind::Interval { lo: Some(lo), hi: Some(hi) } = self.kind {
            if !(lo < hi) {
                return Err(PatternError::EmptyInterval(self.feature.clone()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn matches_value(&self, v: f64) -> bool {
        match self.kind {
            ItemKind::Interval { lo, hi } => lo.is_none_or(|lo| lo <= v) && hi.is_none_or(|hi| v < hi),
            ItemKind::Equals { value } => v == value,
        }
    }
}

fn cmp_kind(a: &ItemKind, b: &ItemKind) -> Ordering {
    use ItemKind::*;
    match (a, b) {
        (Interval { lo: l1, hi: h1 }, Interval { lo: l2, hi: h2 }) => {
            let lo = |x: &Option<f64>| x.unwrap_or(f64::NEG_INFINITY);
            let hi = |x: &Option<f64>| x.unwrap_or(f64::INFINITY);
            lo(l1).total_cmp(&lo(l2)).then(hi(h1).total_cmp(&hi(h2)))
        }
        (Equals { value: a }, Equals { value: b }) => a.total_cmp(b),
        (Interval { .. }, Equals { .. }) => Ordering::Less,
        (Equals { .. }, Interval { .. }) => Ordering::Greater,
    }
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.feature.cmp(&other.feature).then_with(|| cmp_kind(&self.kind, &other.kind))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ItemKind::Equals { value } => write!(f, "{} = {}", self.feature, value),
            ItemKind::Interval { lo, hi } => {
                if let Some(lo) = lo {
                    write!(f, "{lo} <= ")?;
                }
                f.write_str(&self.feature)?;
                if let Some(hi) = hi {
                    write!(f, " < {hi}")?;
                }
                Ok(())
            }
        }
    }
}

/// A conjunction of items, kept sorted by feature name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Item>", into = "Vec<Item>")]
pub struct Pattern {
    items: Vec<Item>,
}

impl Pattern {
    pub fn new(mut items: Vec<Item>) -> Result<Self, PatternError> {
        if items.is_empty() {
            return Err(PatternError::Empty);
        }
        items.sort();
        for w in items.windows(2) {
            if w[0].feature == w[1].feature {
                return Err(PatternError::DuplicateFeature(w[0].feature.clone()));
            }
        }
        for it in &items {
            it.validate()?;
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Conjunction of two patterns; `None` when they constrain a shared
    /// feature differently.
    pub fn union(&self, other: &Pattern) -> Option<Pattern> {
        let mut items = self.items.clone();
        for it in &other.items {
            match items.iter().find(|x| x.feature == it.feature) {
                Some(existing) if existing == it => {}
                Some(_) => return None,
                None => items.push(it.clone()),
            }
        }
        Pattern::new(items).ok()
    }

    /// Evaluates the conjunction on a feature lookup.
    pub fn matches_with(&self, mut value: impl FnMut(&str) -> Option<f64>) -> Option<bool> {
        for it in &self.items {
            if !it.matches_value(value(&it.feature)?) {
                return Some(false);
            }
        }
        Some(true)
    }
}

impl TryFrom<Vec<Item>> for Pattern {
    type Error = PatternError;
    fn try_from(items: Vec<Item>) -> Result<Self, Self::Error> {
        Pattern::new(items)
    }
}

impl From<Pattern> for Vec<Item> {
    fn from(p: Pattern) -> Self {
        p.items
    }
}

impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> Ordering {
        self.items.cmp(&other.items)
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, it) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{it}")?;
        }
        Ok(())
    }
}

/// True iff every item of the pattern holds for the sample.
pub fn matches(pattern: &Pattern, sample: &Sample) -> Result<bool, PatternError> {
    for it in &pattern.items {
        let v = sample
            .value(&it.feature)
            .ok_or_else(|| PatternError::MissingValue { id: sample.id.clone(), feature: it.feature.clone() })?;
        if !it.matches_value(v) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Ids of the samples that match the pattern.
pub fn matching_dataset(pattern: &Pattern, dataset: &Dataset) -> Result<BTreeSet<String>, PatternError> {
    let mut out = BTreeSet::new();
    for s in dataset.samples() {
        if matches(pattern, s)? {
            out.insert(s.id.clone());
        }
    }
    Ok(out)
}

mod growth_serde {
    use super::*;

    pub fn serialize<S: Serializer>(g: &f64, s: S) -> Result<S::Ok, S::Error> {
        if g.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*g)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(alloc::format!("bad growth `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastStats {
    pub support_le: f64,
    pub support_se: f64,
    /// `support_le / support_se`, infinite when the pattern never occurs in SE.
    #[serde(with = "growth_serde")]
    pub growth: f64,
    pub le_count: usize,
    pub se_count: usize,
}

impl ContrastStats {
    pub fn from_counts(le_count: usize, le_total: usize, se_count: usize, se_total: usize) -> Self {
        let support_le = if le_total == 0 { 0.0 } else { le_count as f64 / le_total as f64 };
        let support_se = if se_total == 0 { 0.0 } else { se_count as f64 / se_total as f64 };
        let growth = if support_se == 0.0 { f64::INFINITY } else { support_le / support_se };
        Self { support_le, support_se, growth, le_count, se_count }
    }
}

/// Thresholds for contrast-pattern mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningParams {
    pub min_support_le: f64,
    /// Absolute floor on the number of LE rows a pattern must match.
    pub min_le_count: usize,
    pub min_growth: f64,
    pub max_len: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self { min_support_le: 0.02, min_le_count: 2, min_growth: 2.0, max_len: 4 }
    }
}

impl MiningParams {
    /// Minimum LE count implied by the relative support and the absolute floor.
    pub fn min_count(&self, le_total: usize) -> usize {
        let rel = ceil(self.min_support_le * le_total as f64 - 1e-9).max(0.0) as usize;
        rel.max(self.min_le_count).max(1)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if self.min_support_le > 0.0 && self.min_growth > 0.0 && self.max_len > 0 {
            Ok(())
        } else {
            Err(PatternError::InvalidParams)
        }
    }
}

/// Item alphabet over a fixed set of rows. Items are grouped by feature and
/// the groups appear in increasing `feature_of` order.
#[derive(Debug, Clone)]
pub struct ItemTable {
    pub items: Vec<Item>,
    pub feature_of: Vec<usize>,
    pub rows: Vec<BitSet>,
    pub n_rows: usize,
}

impl ItemTable {
    pub fn new(n_rows: usize) -> Self {
        Self { items: Vec::new(), feature_of: Vec::new(), rows: Vec::new(), n_rows }
    }

    /// Appends an item; `feature` must be >= the feature of the previous item.
    pub fn push(&mut self, item: Item, feature: usize, rows: BitSet) {
        debug_assert!(self.feature_of.last().is_none_or(|&f| f <= feature));
        debug_assert_eq!(rows.len(), self.n_rows);
        self.items.push(item);
        self.feature_of.push(feature);
        self.rows.push(rows);
    }

    pub fn mds(&self, items: &[usize]) -> BitSet {
        let mut acc = BitSet::full(self.n_rows);
        for &i in items {
            acc = acc.and(&self.rows[i]);
        }
        acc
    }

    pub fn pattern(&self, items: &[usize]) -> Pattern {
        Pattern::new(items.iter().map(|&i| self.items[i].clone()).collect())
            .expect("item table patterns have distinct features")
    }
}

/// A mined pattern over an [`ItemTable`].
#[derive(Debug, Clone)]
pub struct MinedPattern {
    pub items: Vec<usize>,
    pub mds: BitSet,
    pub stats: ContrastStats,
}

/// Level-wise mining of every pattern whose LE support and growth pass the
/// thresholds. `le` and `se` are row masks over the table.
pub fn mine_indexed(
    table: &ItemTable,
    le: &BitSet,
    se: &BitSet,
    params: &MiningParams,
) -> Result<Vec<MinedPattern>, PatternError> {
    params.validate()?;
    let le_total = le.count();
    if le_total == 0 {
        return Err(PatternError::EmptyLeClass);
    }
    let se_total = se.count();
    let min_count = params.min_count(le_total);

    let mut out = Vec::new();
    let mut level: Vec<(Vec<usize>, BitSet)> = Vec::new();
    for (i, rows) in table.rows.iter().enumerate() {
        if rows.and_count(le) >= min_count {
            level.push((alloc::vec![i], rows.clone()));
        }
    }
    let mut len = 1;
    loop {
        for (items, mds) in &level {
            let stats = ContrastStats::from_counts(mds.and_count(le), le_total, mds.and_count(se), se_total);
            if stats.growth >= params.min_growth {
                out.push(MinedPattern { items: items.clone(), mds: mds.clone(), stats });
            }
        }
        if len >= params.max_len || level.len() < 2 {
            break;
        }
        let frequent: BTreeSet<&[usize]> = level.iter().map(|(it, _)| it.as_slice()).collect();
        let mut next = Vec::new();
        let mut start = 0;
        while start < level.len() {
            let prefix = &level[start].0[..len - 1];
            let mut end = start + 1;
            while end < level.len() && &level[end].0[..len - 1] == prefix {
                end += 1;
            }
            for a in start..end {
                for b in a + 1..end {
                    let (ia, ib) = (*level[a].0.last().unwrap(), *level[b].0.last().unwrap());
                    if table.feature_of[ia] == table.feature_of[ib] {
                        continue;
                    }
                    let mut cand = level[a].0.clone();
                    cand.push(ib);
                    let subsets_frequent = (0..len - 1).all(|drop| {
                        let sub: Vec<usize> =
                            cand.iter().enumerate().filter(|&(j, _)| j != drop).map(|(_, &x)| x).collect();
                        frequent.contains(sub.as_slice())
                    });
                    if !subsets_frequent {
                        continue;
                    }
                    let mds = level[a].1.and(&table.rows[ib]);
                    if mds.and_count(le) >= min_count {
                        next.push((cand, mds));
                    }
                }
            }
            start = end;
        }
        level = next;
        len += 1;
    }
    Ok(out)
}

/// Total order used to rank contrast patterns: growth (infinite first),
/// then LE support, then shorter patterns, then the pattern itself.
pub fn rank_order(a: (&Pattern, &ContrastStats), b: (&Pattern, &ContrastStats)) -> Ordering {
    b.1.growth
        .total_cmp(&a.1.growth)
        .then(b.1.support_le.total_cmp(&a.1.support_le))
        .then(a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(b.0))
}

/// Greedy redundancy filter over ranked candidates: a candidate is dropped
/// when the Jaccard similarity of its matching rows with any already kept
/// candidate exceeds `jaccard_max`. `order` lists candidate indices in rank
/// order; returns kept indices in that order.
pub fn filter_similar_indexed(order: &[usize], mds: &[BitSet], jaccard_max: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &c in order {
        if kept.iter().all(|&k| mds[k].jaccard(&mds[c]) <= jaccard_max) {
            kept.push(c);
        }
    }
    kept
}

fn item_table_for(samples: &[&Sample], scheme: &DiscretizationScheme) -> Result<ItemTable, PatternError> {
    let n = samples.len();
    let mut table = ItemTable::new(n);
    let value = |s: &Sample, f: &str| {
        s.value(f).ok_or_else(|| PatternError::MissingValue { id: s.id.clone(), feature: f.into() })
    };
    for (fi, feature) in scheme.features().enumerate() {
        let candidates: Vec<Item> = match scheme.get(feature) {
            Some(Binning::Cuts(cuts)) if cuts.is_empty() => continue,
            Some(Binning::Cuts(_)) => feature_items(scheme, feature),
            _ => {
                let mut values: BTreeMap<u64, f64> = BTreeMap::new();
                for s in samples {
                    let v = value(s, feature)?;
                    values.insert(v.to_bits(), v);
                }
                let mut vals: Vec<f64> = values.into_values().collect();
                vals.sort_by(f64::total_cmp);
                vals.into_iter().map(|v| Item::equals(feature, v)).collect()
            }
        };
        for item in candidates {
            let mut rows = BitSet::new(n);
            for (r, s) in samples.iter().enumerate() {
                if item.matches_value(value(s, feature)?) {
                    rows.insert(r);
                }
            }
            table.push(item, fi, rows);
        }
    }
    Ok(table)
}

/// Mines every contrast pattern of the LE class against SE with at most
/// `params.max_len` items. Features with zero cuts carry only the all-range
/// item, which matches everything, so they are left out of the alphabet.
/// Output is sorted by [`rank_order`].
pub fn mine_contrast_patterns(
    le: &Dataset,
    se: &Dataset,
    scheme: &DiscretizationScheme,
    params: &MiningParams,
) -> Result<Vec<(Pattern, ContrastStats)>, PatternError> {
    if le.is_empty() {
        return Err(PatternError::EmptyLeClass);
    }
    let samples: Vec<&Sample> = le.samples().iter().chain(se.samples()).collect();
    let table = item_table_for(&samples, scheme)?;
    let le_mask = BitSet::from_indices(samples.len(), 0..le.len());
    let se_mask = BitSet::from_indices(samples.len(), le.len()..samples.len());
    let mined = mine_indexed(&table, &le_mask, &se_mask, params)?;
    let mut out: Vec<(Pattern, ContrastStats)> =
        mined.into_iter().map(|m| (table.pattern(&m.items), m.stats)).collect();
    out.sort_by(|a, b| rank_order((&a.0, &a.1), (&b.0, &b.1)));
    Ok(out)
}

/// Ranks the candidates and drops those too similar (by matching rows in
/// `dataset`) to a better-ranked kept one.
pub fn filter_similar(
    mut cands: Vec<(Pattern, ContrastStats)>,
    dataset: &Dataset,
    jaccard_max: f64,
) -> Result<Vec<(Pattern, ContrastStats)>, PatternError> {
    cands.sort_by(|a, b| rank_order((&a.0, &a.1), (&b.0, &b.1)));
    let n = dataset.len();
    let mut mds = Vec::with_capacity(cands.len());
    for (p, _) in &cands {
        let mut set = BitSet::new(n);
        for (r, s) in dataset.samples().iter().enumerate() {
            if matches(p, s)? {
                set.insert(r);
            }
        }
        mds.push(set);
    }
    let order: Vec<usize> = (0..cands.len()).collect();
    let kept = filter_similar_indexed(&order, &mds, jaccard_max);
    let mut keep = alloc::vec![false; cands.len()];
    for k in kept {
        keep[k] = true;
    }
    Ok(cands.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect())
}
