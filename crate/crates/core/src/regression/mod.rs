//! Data-rate regression: CART trees, random forest, cross-validation and
//! evaluation helpers.

mod baseline;
mod cv;
mod features;
mod forest;
mod importance;
mod score;
mod tree;

pub use baseline::{MeanRegressor, MeanTrainer, OlsRegressor, OlsTrainer};
pub use cv::{
    cross_matrix, cross_validate, fold_assignment, CrossMatrix, EvaluationReport, Partition,
};
pub use features::{Feature, FeatureVector, LabeledRow, FEATURE_COUNT, FEATURE_NAMES};
pub use forest::{
    assemble_forest, train_forest, train_forest_tree, ForestMeta, ForestParams, ForestTrainer,
    RegressionForest,
};
pub use importance::mdi_importance;
pub use score::r_squared;
pub use tree::{train_tree, Node, RegressionTree, TreeParams};

use crate::Result;

/// A trained model mapping a feature vector to a data rate (MBit/s).
pub trait Regressor {
    fn predict(&self, x: &FeatureVector) -> f64;
}

impl<R: Regressor + ?Sized> Regressor for &R {
    fn predict(&self, x: &FeatureVector) -> f64 {
        (**self).predict(x)
    }
}

/// Fits a [`Regressor`] on labeled rows.
pub trait Trainer {
    type Model: Regressor;

    fn fit(&self, rows: &[LabeledRow], seed: u64) -> Result<Self::Model>;
}
