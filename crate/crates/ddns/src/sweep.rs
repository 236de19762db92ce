//! Parallel Φ_max sweeps and replay timing.

use std::time::Instant;

use ddns_core::engine::{replay, run_seed, ReplayModels, RunConfig, RunResult};
use ddns_core::metrics::{mean, sample_std};
use ddns_core::schemes::SchemeKind;
use ddns_core::trace::Trace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean_ci;

pub const CONFIDENCE: f64 = 0.95;

/// One replay of a sweep, without its event list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scheme: SchemeKind,
    pub phi_max: f64,
    pub trace_id: String,
    pub repetition: usize,
    pub seed: u64,
    pub transmissions: usize,
    pub total_mb: f64,
    pub mean_rate_mbits: Option<f64>,
    pub mean_delay_s: Option<f64>,
}

impl RunRow {
    pub fn from_result(r: &RunResult, repetition: usize) -> Self {
        Self {
            scheme: r.scheme,
            phi_max: r.phi_max,
            trace_id: r.trace_id.clone(),
            repetition,
            seed: r.seed,
            transmissions: r.transmissions(),
            total_mb: r.total_mb,
            mean_rate_mbits: r.mean_rate_mbits,
            mean_delay_s: r.mean_delay_s,
        }
    }
}

/// Aggregate over all runs sharing one Φ_max value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scheme: SchemeKind,
    pub phi_max: f64,
    pub runs: usize,
    /// Runs that transmitted at least once.
    pub active_runs: usize,
    pub mean_rate_mbits: Option<f64>,
    pub rate_ci: Option<f64>,
    pub mean_delay_s: Option<f64>,
    pub delay_ci: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub runs: Vec<RunRow>,
    pub points: Vec<SweepPoint>,
}

fn aggregate(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match values.len() {
        0 => (None, None),
        1 => (Some(values[0]), None),
        _ => match mean_ci(values, CONFIDENCE) {
            Ok((m, h)) => (Some(m), Some(h)),
            Err(_) => (None, None),
        },
    }
}

pub fn summarize_point(scheme: SchemeKind, phi_max: f64, runs: &[RunRow]) -> SweepPoint {
    let rates: Vec<f64> = runs.iter().filter_map(|r| r.mean_rate_mbits).collect();
    let delays: Vec<f64> = runs.iter().filter_map(|r| r.mean_delay_s).collect();
    let (mean_rate_mbits, rate_ci) = aggregate(&rates);
    let (mean_delay_s, delay_ci) = aggregate(&delays);
    SweepPoint {
        scheme,
        phi_max,
        runs: runs.len(),
        active_runs: rates.len(),
        mean_rate_mbits,
        rate_ci,
        mean_delay_s,
        delay_ci,
    }
}

/// Full cross product Φ_max × trace × repetition. Output order is fixed by
/// the grid, independent of how runs are scheduled.
pub fn sweep(
    base: &RunConfig,
    phi_values: &[f64],
    traces: &[Trace],
    seeds_per_point: usize,
    models: &ReplayModels<'_>,
) -> Result<SweepTable> {
    if phi_values.is_empty() || traces.is_empty() || seeds_per_point == 0 {
        return Err(Error::config("sweep grid is empty"));
    }
    let per_phi = traces.len() * seeds_per_point;
    let runs = (0..phi_values.len() * per_phi)
        .into_par_iter()
        .map(|i| {
            let (p, rest) = (i / per_phi, i % per_phi);
            let (t, rep) = (rest / seeds_per_point, rest % seeds_per_point);
            let trace = &traces[t];
            let mut cfg = *base;
            cfg.scheme.phi_max = phi_values[p];
            cfg.seed = run_seed(base.seed, &trace.id, p, rep);
            replay(&cfg, trace, models).map(|r| RunRow::from_result(&r, rep))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points = runs
        .chunks(per_phi)
        .zip(phi_values)
        .map(|(chunk, phi)| summarize_point(base.scheme.kind, *phi, chunk))
        .collect();
    Ok(SweepTable { runs, points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub repetitions: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

pub fn timing_stats(times: &[f64]) -> Result<BenchStats> {
    let m = mean(times)?;
    Ok(BenchStats {
        repetitions: times.len(),
        mean_s: m,
        std_s: if times.len() > 1 { sample_std(times)? } else { 0.0 },
        min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
        max_s: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Wall-clock time of repeated single-trace replays.
pub fn benchmark(config: &RunConfig, trace: &Trace, models: &ReplayModels<'_>, repetitions: usize) -> Result<BenchStats> {
    if repetitions == 0 {
        return Err(Error::config("repetitions must be >= 1"));
    }
    let mut times = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut cfg = *config;
        cfg.seed = run_seed(config.seed, &trace.id, 0, rep);
        let start = Instant::now();
        replay(&cfg, trace, models)?;
        times.push(start.elapsed().as_secs_f64());
    }
    timing_stats(&times)
}
