//! Synthetic drive-test scenarios with a known ground-truth rate function.
//!
//! A vehicle follows a planar trajectory through a deterministic radio
//! field (shared by all traces with the same `field_seed`), with temporal
//! fading, sector-based cell assignment and a payload drawn per
//! transmission. Labels are `g(features) + N(0, noise_std²)`, floored at
//! [`MIN_RATE_MBITS`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    project_position, unproject_position, ContextSample, Direction, GeoPoint, Position, Trace,
    TransmissionRecord,
};
use crate::rng::{mix_seed, rng_from_seed, SimRng};
use crate::{Error, Result};

/// Labels never fall below this rate (MBit/s).
pub const MIN_RATE_MBITS: f64 = 0.05;

const ENB_SPACING_M: f64 = 1200.0;
const TA_STEP_M: f64 = 78.12;
const CARRIERS_MHZ: [f64; 3] = [800.0, 1800.0, 2600.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    /// Smooth dependence on SINR, payload size, carrier and velocity.
    Reference,
    /// Piecewise constant over SINR and payload bins (tree-representable).
    Piecewise,
    SinrLinear { slope: f64, intercept: f64 },
    SinrStep { threshold: f64, low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Straight { heading_deg: f64 },
    Loop { radius_m: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub id: String,
    pub n_samples: usize,
    pub sample_interval_s: f64,
    pub noise_std: f64,
    pub ground_truth: GroundTruth,
    pub trajectory: Trajectory,
    pub speed_kmh: f64,
    pub origin: GeoPoint,
    pub mno: String,
    pub scenario: String,
    pub direction: Direction,
    /// Selects the radio-field realization; traces sharing it see the same coverage.
    pub field_seed: u64,
    pub payload_range_mb: (f64, f64),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "synthetic".to_string(),
            n_samples: 1000,
            sample_interval_s: 1.0,
            noise_std: 1.0,
            ground_truth: GroundTruth::Reference,
            trajectory: Trajectory::Straight { heading_deg: 60.0 },
            speed_kmh: 60.0,
            origin: GeoPoint { lat: 51.4934, lon: 7.4137 },
            mno: "A".to_string(),
            scenario: "urban".to_string(),
            direction: Direction::Uplink,
            field_seed: 0,
            payload_range_mb: (0.1, 10.0),
        }
    }
}

impl ScenarioConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_samples == 0 {
            return bad("scenario needs at least one sample");
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad("noise_std must be finite and >= 0");
        }
        if !(self.sample_interval_s > 0.0) {
            return bad("sample_interval_s must be > 0");
        }
        if !(self.speed_kmh >= 0.0) {
            return bad("speed_kmh must be >= 0");
        }
        let (lo, hi) = self.payload_range_mb;
        if !(lo > 0.0 && hi >= lo) {
            return bad("payload_range_mb must satisfy 0 < lo <= hi");
        }
        if let Trajectory::Loop { radius_m } = self.trajectory {
            if !(radius_m > 0.0) {
                return bad("loop radius must be > 0");
            }
        }
        self.origin.check()?;
        Ok(())
    }
}

/// Ground-truth rate (MBit/s, before noise and flooring).
pub fn ground_truth_rate(truth: &GroundTruth, s: &ContextSample) -> f64 {
    let dir = match s.direction {
        Direction::Uplink => 1.0,
        Direction::Downlink => 1.8,
    };
    match *truth {
        GroundTruth::Reference => {
            let se = libm::log2(1.0 + libm::pow(10.0, s.sinr / 10.0));
            let bw = if s.carrier_freq < 1000.0 {
                0.8
            } else if s.carrier_freq < 2000.0 {
                1.0
            } else {
                1.25
            };
            let slow_start = 1.0 - libm::exp(-s.payload_size / 1.5);
            dir * (0.5 + 3.2 * se * bw * slow_start) - 0.01 * s.velocity
        }
        GroundTruth::Piecewise => {
            const TABLE: [[f64; 3]; 4] =
                [[1.0, 2.0, 3.0], [4.0, 7.0, 9.0], [8.0, 13.0, 17.0], [12.0, 20.0, 26.0]];
            let sb = [0.0, 10.0, 20.0].iter().filter(|&&e| s.sinr >= e).count();
            let pb = [1.0, 4.0].iter().filter(|&&e| s.payload_size >= e).count();
            dir * TABLE[sb][pb]
        }
        GroundTruth::SinrLinear { slope, intercept } => intercept + slope * s.sinr,
        GroundTruth::SinrStep { threshold, low, high } => {
            if s.sinr < threshold {
                low
            } else {
                high
            }
        }
    }
}

struct Field {
    phase: [f64; 4],
    enb_offset: (f64, f64),
}

impl Field {
    fn new(field_seed: u64) -> Self {
        let mut rng = rng_from_seed(mix_seed(&[0xF1E1D, field_seed]));
        let mut phase = [0.0; 4];
        for p in &mut phase {
            *p = rng.random::<f64>() * 2.0 * PI;
        }
        let enb_offset = (rng.random::<f64>() * ENB_SPACING_M, rng.random::<f64>() * ENB_SPACING_M);
        Self { phase, enb_offset }
    }

    fn sinr(&self, p: Position) -> f64 {
        10.0 + 11.0 * libm::sin(p.x / 430.0 + self.phase[0]) * libm::cos(p.y / 370.0 + self.phase[1])
            + 7.0 * libm::sin((p.x - p.y) / 190.0 + self.phase[2])
    }

    /// Serving eNB id, sector, and distance to it.
    fn serving(&self, p: Position) -> (u64, u64, f64) {
        let gx = libm::round((p.x - self.enb_offset.0) / ENB_SPACING_M);
        let gy = libm::round((p.y - self.enb_offset.1) / ENB_SPACING_M);
        let ex = gx * ENB_SPACING_M + self.enb_offset.0;
        let ey = gy * ENB_SPACING_M + self.enb_offset.1;
        let (dx, dy) = (p.x - ex, p.y - ey);
        let enb = ((gx as i64 + 1000) * 2003 + (gy as i64 + 1000)) as u64;
        let angle = libm::atan2(dy, dx) + PI;
        let sector = ((angle / (2.0 * PI / 3.0)) as u64).min(2);
        (enb, sector, libm::hypot(dx, dy))
    }
}

fn planar_path(traj: &Trajectory, s: f64) -> Position {
    match *traj {
        Trajectory::Straight { heading_deg } => {
            let h = heading_deg.to_radians();
            Position::new(s * libm::sin(h), s * libm::cos(h))
        }
        Trajectory::Loop { radius_m } => {
            let a = s / radius_m;
            Position::new(radius_m * libm::sin(a), radius_m - radius_m * libm::cos(a))
        }
    }
}

fn noisy_label(truth: &GroundTruth, s: &ContextSample, noise: f64) -> f64 {
    (ground_truth_rate(truth, s) + noise).max(MIN_RATE_MBITS)
}

fn draw_noise(rng: &mut SimRng, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    }
}

/// Generates a reproducible labeled trace. Every sample carries a label.
pub fn generate_synthetic_scenario(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<(Trace, Vec<TransmissionRecord>)> {
    cfg.check()?;
    let field = Field::new(cfg.field_seed);
    let mut ctx_rng = rng_from_seed(mix_seed(&[seed, 0]));
    let mut noise_rng = rng_from_seed(mix_seed(&[seed, 1]));
    let fading = Normal::new(0.0, 1.5).expect("valid normal");
    let speed_phase = ctx_rng.random::<f64>() * 2.0 * PI;

    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut records = Vec::with_capacity(cfg.n_samples);
    let mut travelled = 0.0;
    let mut fade = 0.0;
    let dt = cfg.sample_interval_s;
    for i in 0..cfg.n_samples {
        let t = i as f64 * dt;
        let wobble = 1.0 + 0.25 * libm::sin(2.0 * PI * t / 300.0 + speed_phase);
        let velocity = (cfg.speed_kmh * wobble + 2.0 * draw_noise(&mut ctx_rng, 1.0)).max(0.0);
        if i > 0 {
            travelled += velocity / 3.6 * dt;
        }
        let geo = unproject_position(planar_path(&cfg.trajectory, travelled), cfg.origin)?;
        let position = project_position(geo, cfg.origin)?;

        fade = 0.8 * fade + fading.sample(&mut ctx_rng);
        let sinr = field.sinr(position) + fade;
        let (enb, sector, dist) = field.serving(position);
        let rsrp = (-85.0 + 1.2 * (sinr - 10.0) - 10.0 * libm::log10(dist.max(30.0) / 300.0)
            + 2.0 * draw_noise(&mut ctx_rng, 1.0))
        .clamp(-140.0, -44.0);
        let rsrq = (-11.0 + 0.35 * (sinr - 10.0) + draw_noise(&mut ctx_rng, 1.0)).clamp(-20.0, -3.0);
        let cqi = libm::round(1.0 + (sinr + 6.0) / 2.4).clamp(1.0, 15.0);
        let (plo, phi) = cfg.payload_range_mb;
        let payload = plo + (phi - plo) * ctx_rng.random::<f64>();

        let sample = ContextSample {
            timestamp: t,
            payload_size: payload,
            rsrp,
            rsrq,
            sinr,
            cqi,
            ta: libm::floor(dist / TA_STEP_M),
            carrier_freq: CARRIERS_MHZ[(enb % 3) as usize],
            velocity,
            cell_id: enb * 3 + sector,
            enb_id: enb,
            geo,
            position,
            mno: cfg.mno.clone(),
            scenario: cfg.scenario.clone(),
            direction: cfg.direction,
        };
        let label = noisy_label(&cfg.ground_truth, &sample, draw_noise(&mut noise_rng, cfg.noise_std));
        records.push(TransmissionRecord { context: sample.clone(), data_rate: label });
        samples.push(sample);
    }
    Ok((Trace::new(cfg.id.clone(), samples)?, records))
}

/// Re-labels the same contexts with a fresh noise draw.
pub fn redraw_labels(
    records: &[TransmissionRecord],
    truth: &GroundTruth,
    noise_std: f64,
    seed: u64,
) -> Vec<TransmissionRecord> {
    let mut rng = rng_from_seed(mix_seed(&[seed, 1]));
    records
        .iter()
        .map(|r| TransmissionRecord {
            context: r.context.clone(),
            data_rate: noisy_label(truth, &r.context, draw_noise(&mut rng, noise_std)),
        })
        .collect()
}
