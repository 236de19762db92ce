//! Probabilistic error model over forest predictions.
//!
//! A one-dimensional Gaussian-process regression of measured rate `y`
//! against predicted rate `ỹ_RF` yields a mean function and a standard
//! deviation function. Virtual measurements are drawn from
//! `N(mean(ỹ_RF), std(ỹ_RF)²)` and clipped to the observed label range.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky_in_place, cholesky_solve, forward_substitute};
use crate::regression::Regressor;
use crate::trace::{ContextSample, TransmissionRecord};
use crate::{Error, Result};

pub const MIN_TRAINING_PAIRS: usize = 10;
/// Diagonal jitter relative to the signal variance.
pub const JITTER: f64 = 1e-8;
const REFINE_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Mean and spread of real measurements around a deterministic prediction.
pub trait ErrorModel {
    fn mean(&self, prediction: f64) -> f64;
    fn std_dev(&self, prediction: f64) -> f64;
    /// `[y_lo, y_hi]` that virtual measurements are clipped to.
    fn clip_range(&self) -> (f64, f64);
}

impl<M: ErrorModel + ?Sized> ErrorModel for &M {
    fn mean(&self, prediction: f64) -> f64 {
        (**self).mean(prediction)
    }
    fn std_dev(&self, prediction: f64) -> f64 {
        (**self).std_dev(prediction)
    }
    fn clip_range(&self) -> (f64, f64) {
        (**self).clip_range()
    }
}

/// Identity mean with a constant spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedSpread {
    pub std_dev: f64,
    pub clip_range: (f64, f64),
}

impl ErrorModel for FixedSpread {
    fn mean(&self, prediction: f64) -> f64 {
        prediction
    }
    fn std_dev(&self, _prediction: f64) -> f64 {
        self.std_dev
    }
    fn clip_range(&self) -> (f64, f64) {
        self.clip_range
    }
}

/// Squared-exponential kernel hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// MBit/s.
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    fn check(&self) -> Result<()> {
        let ok = [self.length_scale, self.signal_variance, self.noise_variance]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("kernel parameters must be finite and > 0".to_string()))
        }
    }

    fn k(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length_scale;
        self.signal_variance * libm::exp(-0.5 * d * d)
    }

    fn scaled(&self, l: f64, f: f64, n: f64) -> Self {
        Self {
            length_scale: self.length_scale * l,
            signal_variance: self.signal_variance * f,
            noise_variance: self.noise_variance * n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Hyperparameters {
    /// Length scale from the input spread, signal variance from the target
    /// variance, noise from the forest's residual variance; `refine` grid
    /// searches ×{¼, ½, 1, 2, 4} of each on the log marginal likelihood.
    Auto { refine: bool },
    Fixed(KernelParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerivationConfig {
    pub hyperparameters: Hyperparameters,
    /// Above this many pairs, inputs are compressed by equal-frequency binning.
    pub max_inducing: usize,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        Self { hyperparameters: Hyperparameters::Auto { refine: false }, max_inducing: 512 }
    }
}

/// Persisted form of a [`DerivationModel`]; the factorization is rebuilt on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationState {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// Per-point observation noise variance.
    pub noise: Vec<f64>,
    pub kernel: KernelParams,
    pub prior_mean: f64,
    pub clip_range: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DerivationState", into = "DerivationState")]
pub struct DerivationModel {
    state: DerivationState,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

impl TryFrom<DerivationState> for DerivationModel {
    type Error = Error;

    fn try_from(state: DerivationState) -> Result<Self> {
        Self::from_state(state)
    }
}

impl From<DerivationModel> for DerivationState {
    fn from(m: DerivationModel) -> Self {
        m.state
    }
}

impl DerivationModel {
    pub fn from_state(state: DerivationState) -> Result<Self> {
        state.kernel.check()?;
        let n = state.inputs.len();
        if n == 0 || state.targets.len() != n || state.noise.len() != n {
            return Err(Error::LengthMismatch { left: n, right: state.targets.len() });
        }
        let (lo, hi) = state.clip_range;
        if !(lo < hi) {
            return Err(Error::FitFailure("clip range must satisfy y_lo < y_hi".to_string()));
        }
        let chol = factorize(&state.inputs, &state.noise, &state.kernel)?;
        let centered: Vec<f64> = state.targets.iter().map(|y| y - state.prior_mean).collect();
        let alpha = cholesky_solve(&chol, n, &centered);
        Ok(Self { state, chol, alpha })
    }

    pub fn state(&self) -> &DerivationState {
        &self.state
    }

    pub fn kernel(&self) -> KernelParams {
        self.state.kernel
    }

    pub fn inducing_len(&self) -> usize {
        self.state.inputs.len()
    }

    /// Log marginal likelihood of the (possibly binned) training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.inducing_len();
        let fit: f64 = self
            .alpha
            .iter()
            .zip(&self.state.targets)
            .map(|(a, y)| a * (y - self.state.prior_mean))
            .sum();
        let log_det: f64 = (0..n).map(|i| libm::log(self.chol[i * n + i])).sum();
        -0.5 * fit - log_det - 0.5 * n as f64 * libm::log(2.0 * core::f64::consts::PI)
    }

    /// Posterior variance of the latent function (without observation noise).
    pub fn latent_variance(&self, v: f64) -> f64 {
        let n = self.inducing_len();
        let mut k: Vec<f64> = self.state.inputs.iter().map(|&x| self.state.kernel.k(v, x)).collect();
        forward_substitute(&self.chol, n, &mut k);
        let explained: f64 = k.iter().map(|z| z * z).sum();
        (self.state.kernel.signal_variance - explained).max(0.0)
    }
}

impl ErrorModel for DerivationModel {
    fn mean(&self, v: f64) -> f64 {
        let kernel = self.state.kernel;
        self.state.prior_mean
            + self.state.inputs.iter().zip(&self.alpha).map(|(&x, a)| kernel.k(v, x) * a).sum::<f64>()
    }

    fn std_dev(&self, v: f64) -> f64 {
        libm::sqrt(self.latent_variance(v) + self.state.kernel.noise_variance)
    }

    fn clip_range(&self) -> (f64, f64) {
        self.state.clip_range
    }
}

fn factorize(inputs: &[f64], noise: &[f64], kernel: &KernelParams) -> Result<Vec<f64>> {
    let n = inputs.len();
    let jitter = JITTER * kernel.signal_variance;
    let mut k = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.k(inputs[i], inputs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += noise[i] + jitter;
    }
    cholesky_in_place(&mut k, n)
        .map_err(|row| Error::FitFailure(alloc::format!("kernel matrix not positive definite at row {row}")))?;
    Ok(k)
}

struct Inducing {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    /// Observation count per point.
    counts: Vec<usize>,
    /// Within-bin target variance (zero for single observations).
    spread: Vec<f64>,
}

fn compress(pairs: &[(f64, f64)], max_points: usize) -> Inducing {
    let n = pairs.len();
    if n <= max_points {
        return Inducing {
            inputs: pairs.iter().map(|p| p.0).collect(),
            targets: pairs.iter().map(|p| p.1).collect(),
            counts: alloc::vec![1; n],
            spread: alloc::vec![0.0; n],
        };
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Inducing {
        inputs: Vec::with_capacity(max_points),
        targets: Vec::with_capacity(max_points),
        counts: Vec::with_capacity(max_points),
        spread: Vec::with_capacity(max_points),
    };
    for b in 0..max_points {
        let bin = &sorted[b * n / max_points..(b + 1) * n / max_points];
        let m = bin.len() as f64;
        let mx = bin.iter().map(|p| p.0).sum::<f64>() / m;
        let my = bin.iter().map(|p| p.1).sum::<f64>() / m;
        let var = if bin.len() > 1 {
            bin.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        out.inputs.push(mx);
        out.targets.push(my);
        out.counts.push(bin.len());
        out.spread.push(var);
    }
    out
}

fn mean_var(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    (m, v.map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

fn build(pts: &Inducing, kernel: KernelParams, prior_mean: f64, clip: (f64, f64)) -> Result<DerivationModel> {
    let noise = pts
        .counts
        .iter()
        .zip(&pts.spread)
        .map(|(&c, &s)| kernel.noise_variance.max(s) / c as f64)
        .collect();
    DerivationModel::from_state(DerivationState {
        inputs: pts.inputs.clone(),
        targets: pts.targets.clone(),
        noise,
        kernel,
        prior_mean,
        clip_range: clip,
    })
}

/// Fits the error model on `(prediction, measurement)` pairs.
pub fn fit_derivation(pairs: &[(f64, f64)], config: &DerivationConfig) -> Result<DerivationModel> {
    if pairs.len() < MIN_TRAINING_PAIRS {
        return Err(Error::TooFewSamples { needed: MIN_TRAINING_PAIRS, got: pairs.len() });
    }
    if pairs.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::FitFailure("non-finite training pair".to_string()));
    }
    if config.max_inducing == 0 {
        return Err(Error::InvalidConfig("max_inducing must be >= 1".to_string()));
    }
    let clip = pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if !(clip.0 < clip.1) {
        return Err(Error::FitFailure("measurements are constant".to_string()));
    }
    let (prior_mean, target_var) = mean_var(pairs.iter().map(|p| p.1));
    let pts = compress(pairs, config.max_inducing);

    match config.hyperparameters {
        Hyperparameters::Fixed(kernel) => {
            kernel.check()?;
            build(&pts, kernel, prior_mean, clip)
        }
        Hyperparameters::Auto { refine } => {
            let (_, input_var) = mean_var(pairs.iter().map(|p| p.0));
            let residual = pairs.iter().map(|p| (p.1 - p.0) * (p.1 - p.0)).sum::<f64>() / pairs.len() as f64;
            let length_scale = if input_var > 0.0 { libm::sqrt(input_var) } else { 1.0 };
            let base = KernelParams {
                length_scale,
                signal_variance: target_var,
                noise_variance: residual.max(1e-6 * target_var),
            };
            if !refine {
                return build(&pts, base, prior_mean, clip);
            }
            let mut best: Option<(f64, DerivationModel)> = None;
            for l in REFINE_GRID {
                for f in REFINE_GRID {
                    for n in REFINE_GRID {
                        let Ok(model) = build(&pts, base.scaled(l, f, n), prior_mean, clip) else {
                            continue;
                        };
                        let lml = model.log_marginal_likelihood();
                        if best.as_ref().is_none_or(|b| lml > b.0) {
                            best = Some((lml, model));
                        }
                    }
                }
            }
            best.map(|b| b.1)
                .ok_or_else(|| Error::FitFailure("no hyperparameter candidate factorized".to_string()))
        }
    }
}

/// One virtual measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualMeasurement {
    /// Forest prediction ỹ_RF, MBit/s.
    pub predicted: f64,
    /// Unclipped Gaussian draw, MBit/s.
    pub raw_sample: f64,
    /// Draw clipped to the error model's range, MBit/s.
    pub clipped: f64,
}

/// Clamps a raw draw into `[lo, hi]`.
pub fn clip_sample(raw: f64, lo: f64, hi: f64) -> f64 {
    if raw < lo {
        lo
    } else if raw > hi {
        hi
    } else {
        raw
    }
}

pub fn sample_virtual<M, R>(model: &M, prediction: f64, rng: &mut R) -> VirtualMeasurement
where
    M: ErrorModel + ?Sized,
    R: Rng + ?Sized,
{
    let z: f64 = StandardNormal.sample(rng);
    let raw = model.mean(prediction) + model.std_dev(prediction) * z;
    let (lo, hi) = model.clip_range();
    VirtualMeasurement { predicted: prediction, raw_sample: raw, clipped: clip_sample(raw, lo, hi) }
}

/// Predicts and samples a virtual measurement for every record, in order.
pub fn synthesize_profile<F, M, R>(
    forest: &F,
    model: &M,
    records: &[TransmissionRecord],
    rng: &mut R,
) -> Result<Vec<(ContextSample, VirtualMeasurement)>>
where
    F: Regressor + ?Sized,
    M: ErrorModel + ?Sized,
    R: Rng + ?Sized,
{
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to synthesize"));
    }
    Ok(records
        .iter()
        .map(|r| {
            let predicted = forest.predict(&r.context.features());
            (r.context.clone(), sample_virtual(model, predicted, rng))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{FeatureVector, LabeledRow, MeanRegressor};
    use crate::rng::rng_from_seed;
    use alloc::vec;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;

    /// Dense closed-form posterior: mean = m + k*ᵀ (K + D)⁻¹ (y − m),
    /// var = k(v,v) − k*ᵀ (K + D)⁻¹ k* + σ_n².
    fn dense_posterior(state: &DerivationState, v: f64) -> (f64, f64) {
        let n = state.inputs.len();
        let kp = state.kernel;
        let k = |a: f64, b: f64| kp.signal_variance * (-(a - b).powi(2) / (2.0 * kp.length_scale.powi(2))).exp();
        let mut m = DMatrix::from_fn(n, n, |i, j| k(state.inputs[i], state.inputs[j]));
        for i in 0..n {
            m[(i, i)] += state.noise[i] + JITTER * kp.signal_variance;
        }
        let inv = m.try_inverse().unwrap();
        let ks = DVector::from_fn(n, |i, _| k(v, state.inputs[i]));
        let y = DVector::from_fn(n, |i, _| state.targets[i] - state.prior_mean);
        let mean = state.prior_mean + (ks.transpose() * &inv * y)[(0, 0)];
        let var = kp.signal_variance - (ks.transpose() * &inv * &ks)[(0, 0)] + kp.noise_variance;
        (mean, var.sqrt())
    }

    fn identity_pairs(n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| (i as f64 * 0.5, i as f64 * 0.5)).collect()
    }

    #[test]
    fn interpolates_noiseless_identity() {
        let pairs = identity_pairs(40);
        let cfg = DerivationConfig {
            hyperparameters: Hyperparameters::Fixed(KernelParams {
                length_scale: 3.0,
                signal_variance: 30.0,
                noise_variance: 1e-6,
            }),
            ..Default::default()
        };
        let m = fit_derivation(&pairs, &cfg).unwrap();
        for i in 0..=78 {
            let v = i as f64 * 0.25;
            assert!((m.mean(v) - v).abs() < 0.05, "{v}: {}", m.mean(v));
        }
    }

    #[test]
    fn far_queries_revert_to_prior() {
        let m = fit_derivation(&identity_pairs(40), &DerivationConfig::default()).unwrap();
        let k = m.kernel();
        let prior = (k.signal_variance + k.noise_variance).sqrt();
        assert!((m.std_dev(1e4) - prior).abs() < 1e-9);
        assert!((m.mean(1e4) - m.state().prior_mean).abs() < 1e-9);
    }

    #[test]
    fn five_points_match_dense_form() {
        let pairs = [(1.0, 1.3), (2.0, 2.4), (3.5, 3.1), (5.0, 6.2), (7.0, 6.8)];
        let mut pairs = pairs.to_vec();
        pairs.extend([(8.0, 8.5), (9.0, 8.8), (10.0, 10.9), (11.0, 10.7), (12.0, 12.6)]);
        let kernel = KernelParams { length_scale: 2.0, signal_variance: 4.0, noise_variance: 0.3 };
        let cfg = DerivationConfig { hyperparameters: Hyperparameters::Fixed(kernel), ..Default::default() };
        let m = fit_derivation(&pairs[..10], &cfg).unwrap();
        for probe in [-3.0, 0.0, 4.2, 6.0, 13.5] {
            let (mean, std) = dense_posterior(m.state(), probe);
            assert!((m.mean(probe) - mean).abs() < 1e-8);
            assert!((m.std_dev(probe) - std).abs() < 1e-8);
        }
    }

    #[test]
    fn binning_caps_inducing_points() {
        let mut rng = rng_from_seed(1);
        let pairs: Vec<(f64, f64)> = (0..3000)
            .map(|_| {
                let x = rng.random::<f64>() * 30.0;
                let z: f64 = StandardNormal.sample(&mut rng);
                (x, x + 2.0 * z)
            })
            .collect();
        let m = fit_derivation(&pairs, &DerivationConfig::default()).unwrap();
        assert_eq!(m.inducing_len(), 512);
        assert!((m.mean(15.0) - 15.0).abs() < 1.0);
        assert!((m.std_dev(15.0) - 2.0).abs() < 0.3, "{}", m.std_dev(15.0));
    }

    #[test]
    fn refine_does_not_lower_likelihood() {
        let mut rng = rng_from_seed(2);
        let pairs: Vec<(f64, f64)> = (0..120)
            .map(|_| {
                let x = rng.random::<f64>() * 20.0;
                let z: f64 = StandardNormal.sample(&mut rng);
                (x, 1.5 * x + z)
            })
            .collect();
        let plain = fit_derivation(&pairs, &DerivationConfig::default()).unwrap();
        let cfg = DerivationConfig { hyperparameters: Hyperparameters::Auto { refine: true }, ..Default::default() };
        let refined = fit_derivation(&pairs, &cfg).unwrap();
        assert!(refined.log_marginal_likelihood() >= plain.log_marginal_likelihood());
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_derivation(&identity_pairs(9), &DerivationConfig::default()),
            Err(Error::TooFewSamples { .. })
        ));
        let constant = vec![(1.0, 2.0); 20];
        assert!(matches!(fit_derivation(&constant, &DerivationConfig::default()), Err(Error::FitFailure(_))));
        let mut nan = identity_pairs(20);
        nan[3].1 = f64::NAN;
        assert!(fit_derivation(&nan, &DerivationConfig::default()).is_err());
    }

    #[test]
    fn clipping_cases() {
        assert_eq!(clip_sample(-0.5, 0.1, 40.0), 0.1);
        assert_eq!(clip_sample(55.0, 0.1, 40.0), 40.0);
        assert_eq!(clip_sample(12.5, 0.1, 40.0), 12.5);
        let zero = FixedSpread { std_dev: 0.0, clip_range: (1.0, 10.0) };
        let mut rng = rng_from_seed(0);
        assert_eq!(sample_virtual(&zero, 12.0, &mut rng).clipped, 10.0);
        assert_eq!(sample_virtual(&zero, 4.0, &mut rng).clipped, 4.0);
    }

    #[test]
    fn profile_with_zero_spread_is_clipped_prediction() {
        let rec = |rate| {
            TransmissionRecord::new(crate::trace::tests::sample(0.0), rate).unwrap()
        };
        let records = vec![rec(1.0), rec(2.0)];
        let forest = MeanRegressor { mean: 50.0 };
        let model = FixedSpread { std_dev: 0.0, clip_range: (0.5, 30.0) };
        let out = synthesize_profile(&forest, &model, &records, &mut rng_from_seed(1)).unwrap();
        assert!(out.iter().all(|(_, v)| v.clipped == 30.0 && v.predicted == 50.0));
        assert!(synthesize_profile(&forest, &model, &[], &mut rng_from_seed(1)).is_err());
        let _ = LabeledRow::new(FeatureVector([0.0; 9]), 1.0);
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let m = fit_derivation(&identity_pairs(30), &DerivationConfig::default()).unwrap();
        let state: DerivationState = m.clone().into();
        let back = DerivationModel::try_from(state).unwrap();
        for v in [0.0, 3.3, 7.7, 100.0] {
            assert_eq!(m.mean(v).to_bits(), back.mean(v).to_bits());
            assert_eq!(m.std_dev(v).to_bits(), back.std_dev(v).to_bits());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn posterior_bounded_and_shift_equivariant(seed in any::<u64>(), c in -20.0..20.0f64, probe in -10.0..40.0f64) {
            let mut rng = rng_from_seed(seed);
            let pairs: Vec<(f64, f64)> = (0..30)
                .map(|_| { let x = rng.random::<f64>() * 30.0; (x, x + rng.random::<f64>() * 4.0) })
                .collect();
            let shifted: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, p.1 + c)).collect();
            let kernel = KernelParams { length_scale: 4.0, signal_variance: 50.0, noise_variance: 1.5 };
            let cfg = DerivationConfig { hyperparameters: Hyperparameters::Fixed(kernel), ..Default::default() };
            let a = fit_derivation(&pairs, &cfg).unwrap();
            let b = fit_derivation(&shifted, &cfg).unwrap();
            let prior = kernel.signal_variance + kernel.noise_variance;
            prop_assert!(a.std_dev(probe) >= 0.0);
            prop_assert!(a.std_dev(probe).powi(2) <= prior * (1.0 + 1e-6));
            prop_assert!((b.mean(probe) - a.mean(probe) - c).abs() < 1e-8);
            prop_assert!((b.std_dev(probe) - a.std_dev(probe)).abs() < 1e-12);
        }

        #[test]
        fn clipping_idempotent_and_monotone(a in -100.0..100.0f64, b in -100.0..100.0f64) {
            let (lo, hi) = (0.1, 40.0);
            let (ca, cb) = (clip_sample(a, lo, hi), clip_sample(b, lo, hi));
            prop_assert_eq!(clip_sample(ca, lo, hi), ca);
            prop_assert!(ca >= lo && ca <= hi);
            if a <= b { prop_assert!(ca <= cb); }
        }
    }
}
