//! Empirical distributions and summary statistics for comparing profiles.

use alloc::vec::Vec;

use crate::{Error, Result};

fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    match xs.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::InvalidSample { index, reason: alloc::format!("{what}: non-finite value") }),
        None => Ok(()),
    }
}

/// Step-function CDF stored at its jump points.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl Ecdf {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.support.partition_point(|v| *v <= x);
        if i == 0 { 0.0 } else { self.probs[i - 1] }
    }
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    check_finite(samples, "ecdf samples")?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        if support.last() == Some(v) {
            *probs.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            support.push(*v);
            probs.push((i + 1) as f64 / n);
        }
    }
    Ok(Ecdf { support, probs })
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    check_finite(xs, "mean input")?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard deviation with Bessel's correction.
pub fn sample_std(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(libm::sqrt(ss / (xs.len() - 1) as f64))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of two ECDFs evaluated on the union of their supports.
pub fn ecdf_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (fa, fb) = (ecdf(a)?, ecdf(b)?);
    let mut grid: Vec<f64> = fa.support.iter().chain(&fb.support).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let va: Vec<f64> = grid.iter().map(|x| fa.eval(*x)).collect();
    let vb: Vec<f64> = grid.iter().map(|x| fb.eval(*x)).collect();
    pearson(&va, &vb)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let (fa, fb) = (ecdf(a)?, ecdf(b)?);
    Ok(fa
        .support
        .iter()
        .chain(&fb.support)
        .map(|x| libm::fabs(fa.eval(*x) - fb.eval(*x)))
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    check_finite(xs, "summary input")?;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    Ok(Summary {
        n,
        mean: mean(xs)?,
        std_dev: if n > 1 { sample_std(xs)? } else { 0.0 },
        min: s[0],
        median,
        max: s[n - 1],
    })
}
