//! Random-forest regression: bootstrap-resampled CART trees with per-split
//! random feature subsets, prediction by averaging.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, RegressionTree, TreeParams};
use super::{FeatureVector, LabeledRow, Regressor, Trainer, FEATURE_COUNT, FEATURE_NAMES};
use crate::rng::{mix_seed, rng_from_seed};
use crate::trace::Direction;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; defaults to ⌈9/3⌉ = 3.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 20,
            min_samples_leaf: 1,
            max_features: Some(FEATURE_COUNT.div_ceil(3)),
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Provenance of a trained forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestMeta {
    pub mno: Option<String>,
    pub direction: Option<Direction>,
    /// `[min, max]` of the training labels.
    pub label_range: (f64, f64),
    /// Per-feature `[min, max]` over the training rows.
    pub feature_ranges: [(f64, f64); FEATURE_COUNT],
    pub n_train: usize,
}

impl ForestMeta {
    fn from_rows(rows: &[LabeledRow]) -> Self {
        let mut label_range = (f64::INFINITY, f64::NEG_INFINITY);
        let mut feature_ranges = [(f64::INFINITY, f64::NEG_INFINITY); FEATURE_COUNT];
        for r in rows {
            label_range = (label_range.0.min(r.y), label_range.1.max(r.y));
            for (range, v) in feature_ranges.iter_mut().zip(r.x.0) {
                *range = (range.0.min(v), range.1.max(v));
            }
        }
        Self { mno: None, direction: None, label_range, feature_ranges, n_train: rows.len() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub params: ForestParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub meta: ForestMeta,
    trees: Vec<RegressionTree>,
}

impl RegressionForest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn with_provenance(mut self, mno: impl Into<String>, direction: Direction) -> Self {
        self.meta.mno = Some(mno.into());
        self.meta.direction = Some(direction);
        self
    }

    /// Prediction from an untyped slice; rejects wrong dimensions.
    pub fn predict_slice(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(&FeatureVector::from_slice(x)?))
    }

    /// Checks the canonical feature schema and every tree.
    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != FEATURE_COUNT
            || self.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::ModelMismatch("feature schema differs from canonical order".into()));
        }
        if self.trees.is_empty() {
            return Err(Error::ModelMismatch("forest has no trees".into()));
        }
        self.trees.iter().try_for_each(RegressionTree::validate)
    }
}

impl Regressor for RegressionForest {
    fn predict(&self, x: &FeatureVector) -> f64 {
        super::tree::sum_predictions(&self.trees, x) / self.trees.len() as f64
    }
}

/// Trains tree `index` of a forest. Trees only depend on `(seed, index)`,
/// so callers may train them in any order or in parallel.
pub fn train_forest_tree(
    rows: &[LabeledRow],
    params: &ForestParams,
    seed: u64,
    index: usize,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    let mut rng = rng_from_seed(mix_seed(&[seed, index as u64]));
    let n = rows.len();
    let indices = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    grow(rows, indices, &params.tree_params(), rng)
}

/// Wraps independently trained trees into a forest with training metadata.
pub fn assemble_forest(
    rows: &[LabeledRow],
    params: &ForestParams,
    seed: u64,
    trees: Vec<RegressionTree>,
) -> Result<RegressionForest> {
    params.check()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    if trees.len() != params.n_trees {
        return Err(Error::LengthMismatch { left: trees.len(), right: params.n_trees });
    }
    Ok(RegressionForest {
        params: params.clone(),
        seed,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        meta: ForestMeta::from_rows(rows),
        trees,
    })
}

pub fn train_forest(rows: &[LabeledRow], params: &ForestParams, seed: u64) -> Result<RegressionForest> {
    params.check()?;
    let trees = (0..params.n_trees)
        .map(|i| train_forest_tree(rows, params, seed, i))
        .collect::<Result<Vec<_>>>()?;
    assemble_forest(rows, params, seed, trees)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForestTrainer {
    pub params: ForestParams,
}

impl Trainer for ForestTrainer {
    type Model = RegressionForest;

    fn fit(&self, rows: &[LabeledRow], seed: u64) -> Result<RegressionForest> {
        train_forest(rows, &self.params, seed)
    }
}
