use crate::{Error, Result};

/// Coefficient of determination `1 − Σ(ỹᵢ − yᵢ)² / Σ(ȳ − yᵢ)²`.
pub fn r_squared(predictions: &[f64], measurements: &[f64]) -> Result<f64> {
    if predictions.len() != measurements.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: measurements.len() });
    }
    let n = measurements.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = measurements.iter().sum::<f64>() / n as f64;
    let total: f64 = measurements.iter().map(|y| (mean - y) * (mean - y)).sum();
    if total == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let residual: f64 = predictions
        .iter()
        .zip(measurements)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(1.0 - residual / total)
}
