//! Reference regressors sharing the forest's interface.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, LabeledRow, Regressor, Trainer, FEATURE_COUNT};
use crate::linalg::solve_dense;
use crate::{Error, Result};

/// Predicts the training-label mean everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRegressor {
    pub mean: f64,
}

impl Regressor for MeanRegressor {
    fn predict(&self, _x: &FeatureVector) -> f64 {
        self.mean
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MeanTrainer;

impl Trainer for MeanTrainer {
    type Model = MeanRegressor;

    fn fit(&self, rows: &[LabeledRow], _seed: u64) -> Result<MeanRegressor> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("no training rows"));
        }
        Ok(MeanRegressor { mean: rows.iter().map(|r| r.y).sum::<f64>() / rows.len() as f64 })
    }
}

/// Ordinary least squares with intercept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsRegressor {
    pub intercept: f64,
    pub coefficients: [f64; FEATURE_COUNT],
}

impl Regressor for OlsRegressor {
    fn predict(&self, x: &FeatureVector) -> f64 {
        self.intercept + self.coefficients.iter().zip(x.0).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Solves the normal equations on standardized, non-constant columns. A
/// singular system is retried with a ridge term that grows from
/// `ridge_fallback` by ×100 per attempt.
#[derive(Clone, Copy, Debug)]
pub struct OlsTrainer {
    pub ridge_fallback: f64,
}

impl Default for OlsTrainer {
    fn default() -> Self {
        Self { ridge_fallback: 1e-10 }
    }
}

impl Trainer for OlsTrainer {
    type Model = OlsRegressor;

    fn fit(&self, rows: &[LabeledRow], _seed: u64) -> Result<OlsRegressor> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("no training rows"));
        }
        let n = rows.len() as f64;
        let y_mean = rows.iter().map(|r| r.y).sum::<f64>() / n;
        let mut mean = [0.0; FEATURE_COUNT];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.x.0) {
                *m += v / n;
            }
        }
        let mut sd = [0.0; FEATURE_COUNT];
        for r in rows {
            for j in 0..FEATURE_COUNT {
                sd[j] += (r.x.0[j] - mean[j]) * (r.x.0[j] - mean[j]);
            }
        }
        let active: Vec<usize> = (0..FEATURE_COUNT)
            .filter(|&j| {
                sd[j] = libm::sqrt(sd[j] / n);
                sd[j] > 1e-12 * (1.0 + mean[j].abs())
            })
            .collect();

        let p = active.len();
        let mut coefficients = [0.0; FEATURE_COUNT];
        if p > 0 {
            let mut gram = alloc::vec![0.0; p * p];
            let mut rhs = alloc::vec![0.0; p];
            let mut z = alloc::vec![0.0; p];
            for r in rows {
                for (a, &j) in active.iter().enumerate() {
                    z[a] = (r.x.0[j] - mean[j]) / sd[j];
                }
                for a in 0..p {
                    rhs[a] += z[a] * (r.y - y_mean);
                    for b in 0..p {
                        gram[a * p + b] += z[a] * z[b];
                    }
                }
            }
            let mut ridge = 0.0;
            let beta = loop {
                let mut g = gram.clone();
                for a in 0..p {
                    g[a * p + a] += ridge * n;
                }
                if let Some(beta) = solve_dense(&g, &rhs, p, 1e-12) {
                    break beta;
                }
                ridge = if ridge == 0.0 { self.ridge_fallback } else { ridge * 100.0 };
                if ridge > 1e6 {
                    return Err(Error::FitFailure("normal equations remain singular".into()));
                }
            };
            for (a, &j) in active.iter().enumerate() {
                coefficients[j] = beta[a] / sd[j];
            }
        }
        let intercept = y_mean - coefficients.iter().zip(mean).map(|(c, m)| c * m).sum::<f64>();
        Ok(OlsRegressor { intercept, coefficients })
    }
}
