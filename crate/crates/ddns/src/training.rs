//! Model training: parallel forest fitting, cross-validated derivation
//! pairs and the training report.

use ddns_core::derivation::{fit_derivation, KernelParams};
use ddns_core::regression::{
    assemble_forest, cross_validate, mdi_importance, train_forest_tree, ForestParams, LabeledRow,
    RegressionForest, Trainer, FEATURE_NAMES,
};
use ddns_core::trace::{Direction, TransmissionRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingConfig;
use crate::error::{Error, Result};
use crate::model::ModelBundle;

/// Same result as the sequential trainer; trees are fitted in parallel.
pub fn train_forest_parallel(rows: &[LabeledRow], params: &ForestParams, seed: u64) -> Result<RegressionForest> {
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| train_forest_tree(rows, params, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_forest(rows, params, seed, trees)?)
}

#[derive(Clone, Debug, Default)]
pub struct ParallelForestTrainer {
    pub params: ForestParams,
}

impl Trainer for ParallelForestTrainer {
    type Model = RegressionForest;

    fn fit(&self, rows: &[LabeledRow], seed: u64) -> ddns_core::Result<RegressionForest> {
        let trees = (0..self.params.n_trees)
            .into_par_iter()
            .map(|i| train_forest_tree(rows, &self.params, seed, i))
            .collect::<ddns_core::Result<Vec<_>>>()?;
        assemble_forest(rows, &self.params, seed, trees)
    }
}

pub fn rows_of(records: &[TransmissionRecord]) -> Vec<LabeledRow> {
    records.iter().map(|r| LabeledRow::new(r.context.features(), r.data_rate)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mno: String,
    pub direction: Direction,
    pub rows: usize,
    pub folds: usize,
    pub cv_r_squared: f64,
    pub fold_r_squared: Vec<Option<f64>>,
    /// Mean-decrease-in-impurity weight per feature, summing to 1.
    pub importance: Vec<(String, f64)>,
    pub derivation_kernel: KernelParams,
    pub clip_range: (f64, f64),
}

/// Fits forest and derivation model for one operator/direction. The
/// derivation model learns from out-of-fold predictions so that its spread
/// reflects generalization error rather than training fit.
pub fn train_bundle(
    records: &[TransmissionRecord],
    cfg: &TrainingConfig,
    seed: u64,
    mno: &str,
    direction: Direction,
) -> Result<(ModelBundle, TrainReport)> {
    if records.is_empty() {
        return Err(Error::data(format!("no labeled records for {mno}/{direction}")));
    }
    let rows = rows_of(records);
    let trainer = ParallelForestTrainer { params: cfg.forest.clone() };
    let cv = cross_validate(&rows, cfg.folds, &trainer, seed)?;
    let derivation = fit_derivation(&cv.residuals, &cfg.derivation)?;
    let forest = trainer.fit(&rows, seed)?.with_provenance(mno, direction);
    let importance = mdi_importance(&forest)?;
    let report = TrainReport {
        mno: mno.into(),
        direction,
        rows: rows.len(),
        folds: cfg.folds,
        cv_r_squared: cv.r_squared,
        fold_r_squared: cv.fold_scores,
        importance: FEATURE_NAMES.iter().map(|n| n.to_string()).zip(importance).collect(),
        derivation_kernel: derivation.kernel(),
        clip_range: derivation.state().clip_range,
    };
    Ok((ModelBundle { forest, derivation, map: None }, report))
}
