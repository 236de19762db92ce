use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 9;

/// Model input columns, in feature-vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "payload_size",
    "rsrp",
    "rsrq",
    "sinr",
    "cqi",
    "ta",
    "carrier_freq",
    "velocity",
    "cell_id",
];

/// Named index into a [`FeatureVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    PayloadSize = 0,
    Rsrp = 1,
    Rsrq = 2,
    Sinr = 3,
    Cqi = 4,
    Ta = 5,
    CarrierFreq = 6,
    Velocity = 7,
    CellId = 8,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::PayloadSize,
        Feature::Rsrp,
        Feature::Rsrq,
        Feature::Sinr,
        Feature::Cqi,
        Feature::Ta,
        Feature::CarrierFreq,
        Feature::Velocity,
        Feature::CellId,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.index()]
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The nine application, channel and mobility context features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample {
                index: i,
                reason: alloc::format!("feature {} is not finite", FEATURE_NAMES[i]),
            });
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_COUNT] =
            values.try_into().map_err(|_| Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                got: values.len(),
            })?;
        Self::new(arr)
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature.index()]
    }

    pub fn with(mut self, feature: Feature, value: f64) -> Self {
        self.0[feature.index()] = value;
        self
    }

    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }
}

/// A supervised training row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub x: FeatureVector,
    pub y: f64,
}

impl LabeledRow {
    pub fn new(x: FeatureVector, y: f64) -> Self {
        Self { x, y }
    }
}
