//! Transmission-decision policies: periodic baseline and the channel-aware
//! family (CAT, pCAT and their predicted-rate variants).

use alloc::format;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connmap::ConnectivityMap;
use crate::regression::{Feature, RegressionForest, Regressor};
use crate::trace::{ContextSample, Direction, Position};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "periodic")]
    Periodic,
    #[serde(rename = "CAT")]
    Cat,
    #[serde(rename = "pCAT")]
    Pcat,
    #[serde(rename = "ML-CAT")]
    MlCat,
    #[serde(rename = "ML-pCAT")]
    MlPcat,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] =
        [SchemeKind::Periodic, SchemeKind::Cat, SchemeKind::Pcat, SchemeKind::MlCat, SchemeKind::MlPcat];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Periodic => "periodic",
            SchemeKind::Cat => "CAT",
            SchemeKind::Pcat => "pCAT",
            SchemeKind::MlCat => "ML-CAT",
            SchemeKind::MlPcat => "ML-pCAT",
        }
    }

    /// Decides on predicted data rate rather than measured SINR.
    pub fn uses_rate_metric(self) -> bool {
        matches!(self, SchemeKind::MlCat | SchemeKind::MlPcat)
    }

    /// Looks ahead along the trajectory.
    pub fn is_predictive(self) -> bool {
        matches!(self, SchemeKind::Pcat | SchemeKind::MlPcat)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: alloc::string::String =
            s.chars().filter(|c| *c != '-' && *c != '_').flat_map(char::to_lowercase).collect();
        Ok(match norm.as_str() {
            "periodic" => SchemeKind::Periodic,
            "cat" => SchemeKind::Cat,
            "pcat" => SchemeKind::Pcat,
            "mlcat" => SchemeKind::MlCat,
            "mlpcat" => SchemeKind::MlPcat,
            _ => return Err(Error::InvalidConfig(format!("unknown scheme '{s}'"))),
        })
    }
}

pub const DEFAULT_ALPHA: f64 = 6.0;
pub const DEFAULT_T_MIN_S: f64 = 10.0;
pub const DEFAULT_T_MAX_S: f64 = 120.0;
pub const DEFAULT_EVALUATION_RATE_HZ: f64 = 1.0;
pub const DEFAULT_PERIOD_S: f64 = 10.0;
pub const DEFAULT_HORIZON_S: f64 = 30.0;
pub const SINR_PHI_MAX_DB: f64 = 30.0;

/// Default upper metric bound: dB for SINR kinds, MBit/s for rate kinds.
pub fn default_phi_max(kind: SchemeKind, mno: &str, direction: Direction) -> f64 {
    if !kind.uses_rate_metric() {
        return SINR_PHI_MAX_DB;
    }
    match (mno, direction) {
        ("B", Direction::Uplink) | ("C", Direction::Uplink) => 20.0,
        ("B", Direction::Downlink) => 50.0,
        ("C", Direction::Downlink) => 15.0,
        _ => 30.0,
    }
}

pub fn default_gamma(kind: SchemeKind) -> f64 {
    match kind {
        SchemeKind::Pcat => 2.0,
        SchemeKind::MlPcat => 0.5,
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub phi_min: f64,
    pub phi_max: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Look-ahead horizon in seconds.
    pub tau_s: f64,
    pub t_min_s: f64,
    pub t_max_s: f64,
    pub evaluation_rate_hz: f64,
    /// Transmission interval of the periodic baseline.
    pub period_s: f64,
}

impl SchemeConfig {
    pub fn with_defaults(kind: SchemeKind, mno: &str, direction: Direction) -> Self {
        Self {
            kind,
            phi_min: 0.0,
            phi_max: default_phi_max(kind, mno, direction),
            alpha: DEFAULT_ALPHA,
            gamma: default_gamma(kind),
            tau_s: DEFAULT_HORIZON_S,
            t_min_s: DEFAULT_T_MIN_S,
            t_max_s: DEFAULT_T_MAX_S,
            evaluation_rate_hz: DEFAULT_EVALUATION_RATE_HZ,
            period_s: DEFAULT_PERIOD_S,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        let all = [
            self.phi_min, self.phi_max, self.alpha, self.gamma, self.tau_s,
            self.t_min_s, self.t_max_s, self.evaluation_rate_hz, self.period_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("scheme parameters must be finite");
        }
        if !(self.phi_max > self.phi_min) {
            return bad("phi_max must exceed phi_min");
        }
        if !(self.t_min_s > 0.0 && self.t_max_s > self.t_min_s) {
            return bad("require t_max > t_min > 0");
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0) {
            return bad("alpha and gamma must be > 0");
        }
        if !(self.evaluation_rate_hz > 0.0 && self.period_s > 0.0 && self.tau_s >= 0.0) {
            return bad("evaluation rate and period must be > 0, horizon >= 0");
        }
        Ok(())
    }
}

/// `(phi - min) / (max - min)` clamped to `[0, 1]`.
pub fn normalize_metric(phi: f64, phi_min: f64, phi_max: f64) -> Result<f64> {
    if !(phi_max > phi_min) {
        return Err(Error::InvalidConfig(format!("metric range [{phi_min}, {phi_max}] is empty")));
    }
    Ok(((phi - phi_min) / (phi_max - phi_min)).clamp(0.0, 1.0))
}

/// Look-ahead exponent factor; above 1 when the channel is expected to improve.
pub fn z_factor(current: f64, future: f64, theta: f64, gamma: f64) -> f64 {
    let delta = future - current;
    if delta > 0.0 {
        libm::fabs(delta * (1.0 - theta) * gamma).max(1.0)
    } else {
        1.0 / libm::fabs(delta * theta * gamma).max(1.0)
    }
}

pub fn tx_probability(theta: f64, alpha: f64, z: f64, dt: f64, t_min: f64, t_max: f64) -> f64 {
    if dt < t_min {
        0.0
    } else if dt > t_max {
        1.0
    } else {
        libm::pow(theta.clamp(0.0, 1.0), alpha * z)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeState {
    pub buffer_mb: f64,
    /// Seconds since the last transmit decision.
    pub dt_s: f64,
    pub last_decision_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub current: f64,
    /// Metric expected at the look-ahead position; `None` when unknown.
    pub future: Option<f64>,
    pub theta: f64,
}

impl MetricSample {
    pub fn new(current: f64, future: Option<f64>, scheme: &SchemeConfig) -> Result<Self> {
        Ok(Self { current, future, theta: normalize_metric(current, scheme.phi_min, scheme.phi_max)? })
    }

    /// Exponent factor, falling back to no change when the future is unknown.
    pub fn z(&self, scheme: &SchemeConfig) -> f64 {
        match (scheme.kind.is_predictive(), self.future) {
            (true, Some(f)) => z_factor(self.current, f, self.theta, scheme.gamma),
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Transmit,
    Hold,
}

// Guards periodic comparisons against accumulated tick rounding.
const PERIOD_EPS: f64 = 1e-9;

pub fn transmit_probability(scheme: &SchemeConfig, state: &SchemeState, metric: &MetricSample) -> f64 {
    match scheme.kind {
        SchemeKind::Periodic => {
            if state.dt_s + PERIOD_EPS >= scheme.period_s { 1.0 } else { 0.0 }
        }
        _ => tx_probability(metric.theta, scheme.alpha, metric.z(scheme), state.dt_s, scheme.t_min_s, scheme.t_max_s),
    }
}

/// Periodic kinds never touch the rng; the others draw exactly one uniform.
pub fn decide<R: Rng + ?Sized>(
    scheme: &SchemeConfig,
    state: &SchemeState,
    metric: &MetricSample,
    rng: &mut R,
) -> Decision {
    let p = transmit_probability(scheme, state, metric);
    let hit = match scheme.kind {
        SchemeKind::Periodic => p >= 1.0,
        _ => rng.random::<f64>() < p,
    };
    if hit { Decision::Transmit } else { Decision::Hold }
}

/// Payload feature used for rate predictions, kept inside the training range.
pub fn payload_feature(forest: &RegressionForest, buffer_mb: f64) -> f64 {
    let (lo, hi) = forest.meta.feature_ranges[Feature::PayloadSize.index()];
    if lo <= hi { buffer_mb.clamp(lo, hi) } else { buffer_mb }
}

/// Rate the forest expects for `context` when sending `buffer_mb`.
pub fn predicted_rate(forest: &RegressionForest, context: &ContextSample, buffer_mb: f64) -> f64 {
    forest.predict(&context.features().with(Feature::PayloadSize, payload_feature(forest, buffer_mb)))
}

pub struct MetricInputs<'a> {
    pub forest: Option<&'a RegressionForest>,
    pub map: Option<&'a ConnectivityMap>,
}

/// Computes the decision metric for `context`. Predictive kinds query the
/// map at `future_position`; an unobserved cell yields no future value.
pub fn metric_source(
    scheme: &SchemeConfig,
    context: &ContextSample,
    buffer_mb: f64,
    future_position: Position,
    inputs: &MetricInputs<'_>,
) -> Result<MetricSample> {
    let kind = scheme.kind;
    let map = if kind.is_predictive() {
        Some(inputs.map.ok_or_else(|| Error::InvalidConfig(format!("{kind} requires a connectivity map")))?)
    } else {
        None
    };
    let (current, future) = if kind.uses_rate_metric() {
        let forest = inputs.forest.ok_or_else(|| Error::ModelMismatch(format!("{kind} requires a trained forest")))?;
        let payload = payload_feature(forest, buffer_mb);
        let current = forest.predict(&context.features().with(Feature::PayloadSize, payload));
        let future = map
            .and_then(|m| m.query_features(future_position))
            .map(|cell| forest.predict(&cell.features().with(Feature::PayloadSize, payload)));
        (current, future)
    } else {
        let future = map.and_then(|m| m.query_features(future_position)).map(|c| c.means[Feature::Sinr.index()]);
        (context.sinr, future)
    };
    MetricSample::new(current, future, scheme)
}
