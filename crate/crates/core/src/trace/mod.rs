//! Measurement data model: context samples, labeled transmissions, traces.

mod geo;
mod synth;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use geo::{project_position, unproject_position, GeoPoint, Position, EARTH_RADIUS_M};
pub use synth::{
    generate_synthetic_scenario, ground_truth_rate, redraw_labels, GroundTruth, ScenarioConfig,
    Trajectory, MIN_RATE_MBITS,
};

use crate::regression::FeatureVector;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uplink" | "ul" => Ok(Direction::Uplink),
            "downlink" | "dl" => Ok(Direction::Downlink),
            other => Err(Error::InvalidConfig(format!("unknown direction '{other}'"))),
        }
    }
}

/// One timestamped context observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSample {
    /// Seconds since trace start.
    pub timestamp: f64,
    /// Megabytes.
    pub payload_size: f64,
    /// dBm.
    pub rsrp: f64,
    /// dB.
    pub rsrq: f64,
    /// dB.
    pub sinr: f64,
    pub cqi: f64,
    pub ta: f64,
    /// MHz.
    pub carrier_freq: f64,
    /// km/h.
    pub velocity: f64,
    pub cell_id: u64,
    pub enb_id: u64,
    /// Geodetic position as recorded.
    pub geo: GeoPoint,
    /// Planar position relative to the trace origin, meters.
    pub position: Position,
    pub mno: String,
    pub scenario: String,
    pub direction: Direction,
}

impl ContextSample {
    pub fn validate(&self) -> core::result::Result<(), String> {
        let numeric = [
            ("timestamp", self.timestamp),
            ("payload_size", self.payload_size),
            ("rsrp", self.rsrp),
            ("rsrq", self.rsrq),
            ("sinr", self.sinr),
            ("cqi", self.cqi),
            ("ta", self.ta),
            ("carrier_freq", self.carrier_freq),
            ("velocity", self.velocity),
            ("x", self.position.x),
            ("y", self.position.y),
        ];
        if let Some((name, _)) = numeric.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("{name} is not finite"));
        }
        if !(self.payload_size > 0.0) {
            return Err(format!("payload_size must be > 0, got {}", self.payload_size));
        }
        if self.velocity < 0.0 {
            return Err(format!("velocity must be >= 0, got {}", self.velocity));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(format!("carrier_freq must be > 0, got {}", self.carrier_freq));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector([
            self.payload_size,
            self.rsrp,
            self.rsrq,
            self.sinr,
            self.cqi,
            self.ta,
            self.carrier_freq,
            self.velocity,
            self.cell_id as f64,
        ])
    }
}

/// A context sample labeled with its measured end-to-end data rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub context: ContextSample,
    /// MBit/s.
    pub data_rate: f64,
}

impl TransmissionRecord {
    pub fn new(context: ContextSample, data_rate: f64) -> Result<Self> {
        if !(data_rate > 0.0) || !data_rate.is_finite() {
            return Err(Error::InvalidSample {
                index: 0,
                reason: format!("data_rate must be > 0, got {data_rate}"),
            });
        }
        Ok(Self { context, data_rate })
    }
}

/// An ordered context trace of a single operator and link direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub mno: String,
    pub direction: Direction,
    samples: Vec<ContextSample>,
}

impl Trace {
    pub fn new(id: impl Into<String>, samples: Vec<ContextSample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput("trace has no samples"))?;
        let (mno, direction) = (first.mno.clone(), first.direction);
        for (index, s) in samples.iter().enumerate() {
            s.validate().map_err(|reason| Error::InvalidSample { index, reason })?;
            if s.mno != mno || s.direction != direction {
                return Err(Error::InvalidSample {
                    index,
                    reason: format!(
                        "trace mixes {}/{} with {}/{}",
                        mno, direction, s.mno, s.direction
                    ),
                });
            }
        }
        if let Some(index) = first_non_increasing(samples.iter().map(|s| s.timestamp)) {
            return Err(Error::NonMonotoneTimestamps { index });
        }
        Ok(Self { id: id.into(), mno, direction, samples })
    }

    pub fn samples(&self) -> &[ContextSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples[0].timestamp
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].timestamp
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Sample with the greatest timestamp `<= t`; the first sample for `t`
    /// before the trace start.
    pub fn sample_at(&self, t: f64) -> &ContextSample {
        let idx = self.samples.partition_point(|s| s.timestamp <= t);
        &self.samples[idx.saturating_sub(1)]
    }
}

/// Index of the first timestamp that is not strictly greater than its
/// predecessor.
pub fn first_non_increasing(ts: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in ts.into_iter().enumerate() {
        if !(t > prev) {
            return Some(i);
        }
        prev = t;
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn sample(t: f64) -> ContextSample {
        ContextSample {
            timestamp: t,
            payload_size: 1.0,
            rsrp: -90.0,
            rsrq: -10.0,
            sinr: 10.0,
            cqi: 9.0,
            ta: 2.0,
            carrier_freq: 1800.0,
            velocity: 50.0,
            cell_id: 7,
            enb_id: 2,
            geo: GeoPoint { lat: 51.0, lon: 7.0 },
            position: Position::default(),
            mno: "A".to_string(),
            scenario: "urban".to_string(),
            direction: Direction::Uplink,
        }
    }

    #[test]
    fn trace_rejects_bad_order() {
        let s = vec![sample(0.0), sample(2.0), sample(1.0), sample(3.0)];
        assert_eq!(Trace::new("t", s), Err(Error::NonMonotoneTimestamps { index: 2 }));
        let s = vec![sample(0.0), sample(0.0)];
        assert_eq!(Trace::new("t", s), Err(Error::NonMonotoneTimestamps { index: 1 }));
    }

    #[test]
    fn trace_rejects_invalid_samples() {
        let mut bad = sample(1.0);
        bad.payload_size = 0.0;
        assert!(matches!(
            Trace::new("t", vec![sample(0.0), bad]),
            Err(Error::InvalidSample { index: 1, .. })
        ));
        let mut other = sample(1.0);
        other.mno = "B".to_string();
        assert!(Trace::new("t", vec![sample(0.0), other]).is_err());
        assert_eq!(Trace::new("t", vec![]), Err(Error::EmptyInput("trace has no samples")));
    }

    #[test]
    fn sample_at_carries_last_observation() {
        let t = Trace::new("t", vec![sample(0.0), sample(1.5), sample(4.0)]).unwrap();
        assert_eq!(t.sample_at(-1.0).timestamp, 0.0);
        assert_eq!(t.sample_at(1.4).timestamp, 0.0);
        assert_eq!(t.sample_at(1.5).timestamp, 1.5);
        assert_eq!(t.sample_at(3.9).timestamp, 1.5);
        assert_eq!(t.sample_at(100.0).timestamp, 4.0);
        assert_eq!(t.duration(), 4.0);
    }

    #[test]
    fn record_label_positive() {
        assert!(TransmissionRecord::new(sample(0.0), 0.0).is_err());
        assert!(TransmissionRecord::new(sample(0.0), 1.0).is_ok());
    }

    #[test]
    fn direction_parse() {
        assert_eq!("UL".parse::<Direction>().unwrap(), Direction::Uplink);
        assert_eq!("downlink".parse::<Direction>().unwrap(), Direction::Downlink);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
