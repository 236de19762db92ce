//! k-fold cross-validation and cross-partition evaluation matrices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{r_squared, LabeledRow, Regressor, Trainer};
use crate::rng::{mix_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// R² over all out-of-fold pairs.
    pub r_squared: f64,
    pub n: usize,
    /// Per-fold R²; `None` where a fold is too small or constant.
    pub fold_scores: Vec<Option<f64>>,
    /// Out-of-fold `(prediction, measurement)` pairs in input row order.
    pub residuals: Vec<(f64, f64)>,
}

impl EvaluationReport {
    pub fn predictions(&self) -> impl Iterator<Item = f64> + '_ {
        self.residuals.iter().map(|p| p.0)
    }
}

/// Fold index per row: a seeded shuffle cut into `k` contiguous chunks whose
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(alloc::format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::TooFewSamples { needed: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(mix_seed(&[seed, 0xF01D])));
    let (base, extra) = (n / k, n % k);
    let mut fold = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            fold[row] = f;
        }
        pos += size;
    }
    Ok(fold)
}

pub fn cross_validate<T: Trainer>(
    rows: &[LabeledRow],
    k: usize,
    trainer: &T,
    seed: u64,
) -> Result<EvaluationReport> {
    let fold = fold_assignment(rows.len(), k, seed)?;
    let mut preds = vec![0.0; rows.len()];
    let mut fold_scores = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<LabeledRow> =
            rows.iter().zip(&fold).filter(|(_, &g)| g != f).map(|(r, _)| *r).collect();
        let model = trainer.fit(&train, mix_seed(&[seed, f as u64]))?;
        let (mut p, mut y) = (Vec::new(), Vec::new());
        for (i, r) in rows.iter().enumerate().filter(|(i, _)| fold[*i] == f) {
            preds[i] = model.predict(&r.x);
            p.push(preds[i]);
            y.push(r.y);
        }
        fold_scores.push(r_squared(&p, &y).ok());
    }
    let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
    Ok(EvaluationReport {
        r_squared: r_squared(&preds, &ys)?,
        n: rows.len(),
        fold_scores,
        residuals: preds.into_iter().zip(ys).collect(),
    })
}

/// A labeled subset of the data, e.g. one operator or one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub label: String,
    pub rows: Vec<LabeledRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossMatrix {
    pub labels: Vec<String>,
    /// `r2[train][test]`; the diagonal holds k-fold CV scores.
    pub r2: Vec<Vec<f64>>,
}

/// Cross-partition R²: diagonal entries are k-fold CV within a partition,
/// off-diagonal entries train on the row partition and test on the column
/// partition. All models use the same training seed.
pub fn cross_matrix<T: Trainer>(
    partitions: &[Partition],
    k: usize,
    trainer: &T,
    seed: u64,
) -> Result<CrossMatrix> {
    if partitions.len() < 2 {
        return Err(Error::InvalidConfig("cross matrix needs at least two partitions".into()));
    }
    let m = partitions.len();
    let mut r2 = vec![vec![0.0; m]; m];
    for (i, train) in partitions.iter().enumerate() {
        r2[i][i] = cross_validate(&train.rows, k, trainer, seed)?.r_squared;
        let model = trainer.fit(&train.rows, mix_seed(&[seed, 0x7EA1]))?;
        for (j, test) in partitions.iter().enumerate().filter(|(j, _)| *j != i) {
            let p: Vec<f64> = test.rows.iter().map(|r| model.predict(&r.x)).collect();
            let y: Vec<f64> = test.rows.iter().map(|r| r.y).collect();
            r2[i][j] = r_squared(&p, &y)?;
        }
    }
    Ok(CrossMatrix { labels: partitions.iter().map(|p| p.label.clone()).collect(), r2 })
}
