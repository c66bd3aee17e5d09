//! Samples, datasets, column selection and cross-validation folds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydrology::{names, ModelConfig};
use crate::matrix::{DesignMatrix, Matrix};

/// Allowed deviation of sand + silt + clay from 100 %.
pub const TEXTURE_SUM_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{id}`: column `{column}` is not declared in the dataset")]
    UndeclaredColumn { id: String, column: String },
    #[error("sample `{id}`: sand + silt + clay = {sum} is not within 100 +/- 0.5")]
    TextureSum { id: String, sum: f64 },
    #[error("sample `{id}`: water content `{column}` = {value} outside [0, 1]")]
    WaterContentRange { id: String, column: String, value: f64 },
    #[error("sample `{id}`: `{column}` must be positive, got {value}")]
    NonPositiveGeometry { id: String, column: String, value: f64 },
    #[error("sample `{id}`: `{column}` is not finite")]
    NonFinite { id: String, column: String },
    #[error("no usable rows: all {excluded} samples miss a required column")]
    NoUsableRows { excluded: usize },
    #[error("column `{0}` is not part of the dataset")]
    UnknownColumn(String),
    #[error("need k >= 2 and at least k samples (k = {k}, n = {n})")]
    TooFewForFolds { k: usize, n: usize },
}

/// One soil record. A column that is declared by the dataset but absent
/// from the sample's maps is missing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: BTreeMap<String, f64>,
    pub targets: BTreeMap<String, f64>,
}

impl Sample {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), ..Self::default() }
    }

    pub fn with_feature(mut self, name: &str, value: f64) -> Self {
        self.features.insert(name.to_string(), value);
        self
    }

    pub fn with_target(mut self, name: &str, value: f64) -> Self {
        self.targets.insert(name.to_string(), value);
        self
    }

    pub fn feature(&self, name: &str) -> Option<f64> {
        self.features.get(name).copied()
    }

    /// Looks a column up among features first, then targets.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.features.get(name).or_else(|| self.targets.get(name)).copied()
    }

    /// Sand + silt + clay when all three are present.
    pub fn texture_sum(&self) -> Option<f64> {
        Some(self.feature(names::SAND)? + self.feature(names::SILT)? + self.feature(names::CLAY)?)
    }

    /// Fails when the texture fractions are present and do not sum to
    /// 100 within [`TEXTURE_SUM_TOLERANCE`].
    pub fn check_texture(&self) -> Result<(), DatasetError> {
        match self.texture_sum() {
            Some(sum) if !((sum - 100.0).abs() <= TEXTURE_SUM_TOLERANCE) => {
                Err(DatasetError::TextureSum { id: self.id.clone(), sum })
            }
            _ => Ok(()),
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        for (column, &v) in self.features.iter().chain(&self.targets) {
            if !v.is_finite() {
                return Err(DatasetError::NonFinite { id: self.id.clone(), column: column.clone() });
            }
        }
        for (column, &v) in self.features.iter().chain(&self.targets) {
            if names::is_water_content(column) && !(0.0..=1.0).contains(&v) {
                return Err(DatasetError::WaterContentRange { id: self.id.clone(), column: column.clone(), value: v });
            }
        }
        for column in [names::INTERNAL_DIAMETER, names::LENGTH] {
            if let Some(v) = self.feature(column) {
                if v <= 0.0 {
                    return Err(DatasetError::NonPositiveGeometry {
                        id: self.id.clone(),
                        column: column.to_string(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// An immutable, validated collection of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_names: Vec<String>,
    target_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        feature_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId(s.id.clone()));
            }
            for column in s.features.keys() {
                if !feature_names.contains(column) {
                    return Err(DatasetError::UndeclaredColumn { id: s.id.clone(), column: column.clone() });
                }
            }
            for column in s.targets.keys() {
                if !target_names.contains(column) {
                    return Err(DatasetError::UndeclaredColumn { id: s.id.clone(), column: column.clone() });
                }
            }
            s.validate()?;
        }
        Ok(Self { samples, feature_names, target_names })
    }

    /// Texture-sum check over every sample. Kept apart from [`Dataset::new`]
    /// so that illustrative tables with rounded fractions still load.
    pub fn check_texture(&self) -> Result<(), DatasetError> {
        self.samples.iter().try_for_each(Sample::check_texture)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    fn has_column(&self, name: &str) -> bool {
        self.feature_names.iter().chain(&self.target_names).any(|n| n == name)
    }

    /// Subset with the given row indices, keeping declared columns.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
        }
    }
}

/// Rows that survive listwise exclusion for a set of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub ids: Vec<String>,
    pub x: DesignMatrix,
    pub target_names: Vec<String>,
    /// One column per target, rows aligned with `ids`.
    pub y: Matrix,
    pub excluded: Vec<String>,
}

impl Selection {
    pub fn target(&self, t: usize) -> Vec<f64> {
        self.y.column(t)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Extracts the design matrix (no intercept column) and targets for the
/// given columns, dropping every sample that misses any of them.
pub fn select(dataset: &Dataset, features: &[String], targets: &[String]) -> Result<Selection, DatasetError> {
    for name in features.iter().chain(targets) {
        if !dataset.has_column(name) {
            return Err(DatasetError::UnknownColumn(name.clone()));
        }
    }
    let mut ids = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    'samples: for s in dataset.samples() {
        let mut row = Vec::with_capacity(features.len());
        for f in features {
            match s.value(f) {
                Some(v) => row.push(v),
                None => {
                    excluded.push(s.id.clone());
                    continue 'samples;
                }
            }
        }
        let mut yrow = Vec::with_capacity(targets.len());
        for t in targets {
            match s.value(t) {
                Some(v) => yrow.push(v),
                None => {
                    excluded.push(s.id.clone());
                    continue 'samples;
                }
            }
        }
        ids.push(s.id.clone());
        xs.extend(row);
        ys.extend(yrow);
    }
    if ids.is_empty() {
        return Err(DatasetError::NoUsableRows { excluded: excluded.len() });
    }
    let n = ids.len();
    Ok(Selection {
        ids,
        x: DesignMatrix::new(features.to_vec(), Matrix::from_row_major(n, features.len(), xs)),
        target_names: targets.to_vec(),
        y: Matrix::from_row_major(n, targets.len(), ys),
        excluded,
    })
}

/// Column selection for one of the model configurations.
pub fn select_columns(dataset: &Dataset, config: &ModelConfig) -> Result<Selection, DatasetError> {
    select(dataset, &config.features, &config.targets)
}

/// Partition of sample ids into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub repetition: u64,
    pub k: usize,
    pub fold_of_sample: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &f in self.fold_of_sample.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles positions `0..n` with a seeded ChaCha8 stream and deals them
/// round-robin into `k` folds.
pub fn assign_fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if k < 2 || n < k {
        return Err(DatasetError::TooFewForFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold = alloc::vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

pub fn assign_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    let folds = assign_fold_indices(dataset.len(), k, seed)?;
    Ok(FoldAssignment { repetition: 0, k, fold_of_sample: dataset.ids().map(String::from).zip(folds).collect() })
}
