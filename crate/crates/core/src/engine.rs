//! Trace replay: ticks through a recorded drive, feeds the data source into
//! the buffer, asks the scheme when to send and samples a virtual rate for
//! every transmission.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::connmap::ConnectivityMap;
use crate::derivation::{sample_virtual, ErrorModel};
use crate::regression::RegressionForest;
use crate::rng::{mix_seed, rng_from_seed, stable_hash};
use crate::schemes::{
    decide, metric_source, predicted_rate, Decision, MetricInputs, MetricSample, SchemeConfig, SchemeKind,
    SchemeState,
};
use crate::trace::Trace;
use crate::{Error, Result};

pub const DEFAULT_SOURCE_RATE_KBYTE_S: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayMode {
    /// Mean age of uniformly accumulated data: half the interval.
    #[default]
    Half,
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateAggregation {
    #[default]
    PerTransmission,
    ByteWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    pub source_rate_kbyte_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub delay_mode: DelayMode,
    #[serde(default)]
    pub rate_aggregation: RateAggregation,
}

impl RunConfig {
    pub fn new(scheme: SchemeConfig, seed: u64) -> Self {
        Self {
            scheme,
            source_rate_kbyte_s: DEFAULT_SOURCE_RATE_KBYTE_S,
            seed,
            delay_mode: DelayMode::default(),
            rate_aggregation: RateAggregation::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if !(self.source_rate_kbyte_s > 0.0) || !self.source_rate_kbyte_s.is_finite() {
            return Err(Error::InvalidConfig("source rate must be > 0".into()));
        }
        Ok(())
    }

    /// Source rate in MB/s (1 MB = 1000 kByte).
    pub fn source_rate_mb_s(&self) -> f64 {
        self.source_rate_kbyte_s / 1000.0
    }
}

/// Trained artifacts a replay reads from; shared read-only between runs.
#[derive(Clone, Copy)]
pub struct ReplayModels<'a> {
    pub forest: &'a RegressionForest,
    pub derivation: &'a (dyn ErrorModel + Sync),
    pub map: Option<&'a ConnectivityMap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionEvent {
    pub time_s: f64,
    pub payload_mb: f64,
    /// Accumulation interval that produced this payload.
    pub interval_s: f64,
    pub predicted_mbits: f64,
    pub virtual_mbits: f64,
    pub duration_s: f64,
    pub buffering_delay_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace_id: String,
    pub scheme: SchemeKind,
    pub phi_max: f64,
    pub seed: u64,
    pub ticks: u64,
    pub events: Vec<TransmissionEvent>,
    pub mean_rate_mbits: Option<f64>,
    pub mean_delay_s: Option<f64>,
    pub total_mb: f64,
}

impl RunResult {
    pub fn transmissions(&self) -> usize {
        self.events.len()
    }
}

/// Seed for one sweep run, independent of execution order.
pub fn run_seed(base: u64, trace_id: &str, phi_index: usize, repetition: usize) -> u64 {
    mix_seed(&[base, stable_hash(trace_id), phi_index as u64, repetition as u64])
}

pub fn event_delay(interval_s: f64, mode: DelayMode) -> f64 {
    match mode {
        DelayMode::Half => 0.5 * interval_s,
        DelayMode::Full => interval_s,
    }
}

/// Payload-weighted mean buffering delay.
pub fn buffering_delay(events: &[TransmissionEvent]) -> Result<f64> {
    let total: f64 = events.iter().map(|e| e.payload_mb).sum();
    if events.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyRun);
    }
    Ok(events.iter().map(|e| e.payload_mb * e.buffering_delay_s).sum::<f64>() / total)
}

pub fn mean_rate(events: &[TransmissionEvent], aggregation: RateAggregation) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptyRun);
    }
    Ok(match aggregation {
        RateAggregation::PerTransmission => {
            events.iter().map(|e| e.virtual_mbits).sum::<f64>() / events.len() as f64
        }
        RateAggregation::ByteWeighted => {
            let total: f64 = events.iter().map(|e| e.payload_mb).sum();
            events.iter().map(|e| e.payload_mb * e.virtual_mbits).sum::<f64>() / total
        }
    })
}

fn check_binding(trace: &Trace, forest: &RegressionForest) -> Result<()> {
    if let Some(mno) = &forest.meta.mno {
        if *mno != trace.mno {
            return Err(Error::ModelMismatch(format!("forest trained for operator {mno}, trace is {}", trace.mno)));
        }
    }
    if let Some(d) = forest.meta.direction {
        if d != trace.direction {
            return Err(Error::ModelMismatch(format!("forest trained for {d}, trace is {}", trace.direction)));
        }
    }
    Ok(())
}

/// Replays `trace` under `config`. Decision ticks start one evaluation
/// interval after the first sample and stop at the last one.
pub fn replay(config: &RunConfig, trace: &Trace, models: &ReplayModels<'_>) -> Result<RunResult> {
    config.validate()?;
    check_binding(trace, models.forest)?;
    let scheme = &config.scheme;
    let interval = 1.0 / scheme.evaluation_rate_hz;
    let n_ticks = libm::floor(trace.duration() / interval + 1e-9) as u64;
    let per_tick_mb = config.source_rate_mb_s() * interval;
    let inputs = MetricInputs { forest: Some(models.forest), map: models.map };
    let mut rng = rng_from_seed(config.seed);
    let mut state = SchemeState::default();
    let mut since_ticks = 0u64;
    let mut events = Vec::new();
    let idle = MetricSample { current: 0.0, future: None, theta: 0.0 };
    if scheme.kind != SchemeKind::Periodic {
        // surface missing inputs before the loop, not at the first window tick
        let first = trace.sample_at(trace.start());
        metric_source(scheme, first, 0.0, first.position, &inputs)?;
    }

    for k in 1..=n_ticks {
        let t = trace.start() + k as f64 * interval;
        since_ticks += 1;
        state.buffer_mb += per_tick_mb;
        state.dt_s = since_ticks as f64 * interval;
        let ctx = trace.sample_at(t);
        // outside [t_min, t_max] the probability is fixed and the metric unused
        let in_window = state.dt_s >= scheme.t_min_s && state.dt_s <= scheme.t_max_s;
        let metric = if scheme.kind == SchemeKind::Periodic || !in_window {
            idle
        } else {
            let ahead = trace.sample_at(t + scheme.tau_s).position;
            metric_source(scheme, ctx, state.buffer_mb, ahead, &inputs)?
        };
        let decision = decide(scheme, &state, &metric, &mut rng);
        state.last_decision_time = t;
        if decision == Decision::Hold {
            continue;
        }
        let predicted = predicted_rate(models.forest, ctx, state.buffer_mb);
        let vm = sample_virtual(models.derivation, predicted, &mut rng);
        if !(vm.clipped > 0.0) {
            return Err(Error::ModelMismatch(format!("non-positive virtual rate {} at t={t}", vm.clipped)));
        }
        events.push(TransmissionEvent {
            time_s: t,
            payload_mb: state.buffer_mb,
            interval_s: state.dt_s,
            predicted_mbits: predicted,
            virtual_mbits: vm.clipped,
            duration_s: state.buffer_mb * 8.0 / vm.clipped,
            buffering_delay_s: event_delay(state.dt_s, config.delay_mode),
        });
        state.buffer_mb = 0.0;
        state.dt_s = 0.0;
        since_ticks = 0;
    }

    Ok(RunResult {
        trace_id: trace.id.clone(),
        scheme: scheme.kind,
        phi_max: scheme.phi_max,
        seed: config.seed,
        ticks: n_ticks,
        mean_rate_mbits: mean_rate(&events, config.rate_aggregation).ok(),
        mean_delay_s: buffering_delay(&events).ok(),
        total_mb: events.iter().map(|e| e.payload_mb).sum(),
        events,
    })
}
