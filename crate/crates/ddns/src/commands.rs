//! Pipeline commands. Each returns the files it wrote; all outputs are
//! byte-identical for identical inputs and seeds, except benchmark timings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ddns_core::connmap::ConnectivityMap;
use ddns_core::engine::{replay, run_seed, ReplayModels, RunResult};
use ddns_core::metrics::ecdf_similarity;
use ddns_core::regression::{cross_matrix, Partition};
use ddns_core::rng::mix_seed;
use ddns_core::schemes::SchemeKind;
use ddns_core::trace::{generate_synthetic_scenario, ScenarioConfig, Trace, TransmissionRecord, Trajectory};
use serde::Serialize;

use crate::config::ProjectConfig;
use crate::dataset::{read_trace_csv, save_trace_csv, LabeledTrace};
use crate::error::{write_file, Error, Result};
use crate::model::ModelBundle;
use crate::report::{events_csv, map_cells_csv, matrix_csv, read_rates_file, rows_csv, save_json};
use crate::sweep::{benchmark, sweep, RunRow, SweepPoint};
use crate::training::{rows_of, train_bundle, ParallelForestTrainer};

pub type Written = Vec<PathBuf>;

fn emit(path: PathBuf, bytes: Vec<u8>, written: &mut Written) -> Result<()> {
    write_file(&path, bytes)?;
    written.push(path);
    Ok(())
}

pub fn load_traces(cfg: &ProjectConfig, files: &[PathBuf]) -> Result<Vec<LabeledTrace>> {
    let files = if files.is_empty() { cfg.trace_files()? } else { files.to_vec() };
    let traces: Vec<LabeledTrace> =
        files.iter().map(|f| read_trace_csv(f, &cfg.columns, cfg.origin)).collect::<Result<_>>()?;
    let mut ids: Vec<&str> = traces.iter().map(|t| t.trace.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::data(format!("duplicate trace id '{}'", w[0])));
    }
    Ok(traces)
}

/// Traces of the configured operator and direction.
pub fn selected(cfg: &ProjectConfig, traces: &[LabeledTrace]) -> Result<Vec<LabeledTrace>> {
    let out: Vec<LabeledTrace> = traces
        .iter()
        .filter(|t| t.trace.mno == cfg.mno && t.trace.direction == cfg.direction)
        .cloned()
        .collect();
    if out.is_empty() {
        return Err(Error::data(format!("selection {}/{} matches no traces", cfg.mno, cfg.direction)));
    }
    Ok(out)
}

fn labeled_records(traces: &[LabeledTrace]) -> Vec<TransmissionRecord> {
    traces.iter().flat_map(LabeledTrace::records).collect()
}

/// Scenarios produced when the config lists none: five drives through one
/// shared radio field, alternating straight and looping trajectories.
pub fn default_scenarios(cfg: &ProjectConfig) -> Vec<ScenarioConfig> {
    (0..5)
        .map(|i| ScenarioConfig {
            id: format!("synth-{i}"),
            mno: cfg.mno.clone(),
            direction: cfg.direction,
            origin: cfg.origin,
            trajectory: if i % 2 == 0 {
                Trajectory::Straight { heading_deg: 20.0 + 70.0 * i as f64 }
            } else {
                Trajectory::Loop { radius_m: 900.0 + 300.0 * i as f64 }
            },
            ..ScenarioConfig::default()
        })
        .collect()
}

pub fn cmd_synth(cfg: &ProjectConfig) -> Result<Written> {
    let scenarios = if cfg.synth.is_empty() { default_scenarios(cfg) } else { cfg.synth.clone() };
    let dir = cfg.traces.first().ok_or_else(|| Error::config("no trace directory configured"))?;
    let mut written = Vec::new();
    for (i, sc) in scenarios.iter().enumerate() {
        let (trace, records) = generate_synthetic_scenario(sc, mix_seed(&[cfg.seed, i as u64]))?;
        let path = dir.join(format!("{}.csv", sc.id));
        save_trace_csv(&path, &LabeledTrace::fully_labeled(trace, &records)?)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct IngestEntry {
    trace_id: String,
    mno: String,
    direction: String,
    samples: usize,
    labeled: usize,
    duration_s: f64,
}

/// Validates trace files and rewrites them in canonical form.
pub fn cmd_ingest(cfg: &ProjectConfig, files: &[PathBuf]) -> Result<Written> {
    let traces = load_traces(cfg, files)?;
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for t in &traces {
        let path = cfg.out_dir.join("traces").join(format!("{}.csv", t.trace.id));
        save_trace_csv(&path, t)?;
        written.push(path);
        summary.push(IngestEntry {
            trace_id: t.trace.id.clone(),
            mno: t.trace.mno.clone(),
            direction: t.trace.direction.to_string(),
            samples: t.trace.len(),
            labeled: t.labeled_count(),
            duration_s: t.trace.duration(),
        });
    }
    let path = cfg.out_dir.join("ingest_summary.json");
    save_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}

pub fn cmd_train(cfg: &ProjectConfig) -> Result<Written> {
    let traces = selected(cfg, &load_traces(cfg, &[])?)?;
    let records = labeled_records(&traces);
    if records.is_empty() {
        return Err(Error::data(format!("selection {}/{} has no labeled rows", cfg.mno, cfg.direction)));
    }
    let (bundle, report) = train_bundle(&records, &cfg.training, cfg.seed, &cfg.mno, cfg.direction)?;
    let model_path = cfg.model_path(&cfg.mno, cfg.direction);
    bundle.save(&model_path)?;
    let report_path = cfg.out_dir.join(format!("train_report-{}-{}.json", cfg.mno, cfg.direction));
    save_json(&report_path, &report)?;
    Ok(vec![model_path, report_path])
}

pub fn load_bundle(cfg: &ProjectConfig) -> Result<ModelBundle> {
    let path = cfg.model_path(&cfg.mno, cfg.direction);
    if !path.is_file() {
        return Err(Error::model(format!(
            "no model bound for {}/{} (expected {})",
            cfg.mno,
            cfg.direction,
            path.display()
        )));
    }
    ModelBundle::load(&path)
}

pub fn cmd_map(cfg: &ProjectConfig) -> Result<Written> {
    let traces = selected(cfg, &load_traces(cfg, &[])?)?;
    let mut bundle = load_bundle(cfg)?;
    let mut map = ConnectivityMap::new(cfg.map.cell_size_m)?;
    traces.iter().for_each(|t| map.insert_trace(&t.trace));
    map.build_prediction_layer(&bundle.forest, cfg.map.payload_mb)?;
    let mut written = Vec::new();
    emit(cfg.out_dir.join(format!("map_cells-{}-{}.csv", cfg.mno, cfg.direction)), map_cells_csv(&map)?, &mut written)?;
    bundle.map = Some(map);
    let model_path = cfg.model_path(&cfg.mno, cfg.direction);
    bundle.save(&model_path)?;
    written.push(model_path);
    Ok(written)
}

fn models_for<'a>(bundle: &'a ModelBundle, kind: SchemeKind) -> Result<ReplayModels<'a>> {
    if kind.is_predictive() && bundle.map.is_none() {
        return Err(Error::model(format!("{kind} needs a connectivity map; run the map command first")));
    }
    Ok(ReplayModels { forest: &bundle.forest, derivation: &bundle.derivation, map: bundle.map.as_ref() })
}

#[derive(Serialize)]
struct ReplaySummary<'a> {
    scheme: SchemeKind,
    phi_max: f64,
    runs: &'a [RunRow],
    overall: SweepPoint,
}

pub fn cmd_replay(cfg: &ProjectConfig, kind: SchemeKind, phi_max: Option<f64>) -> Result<Written> {
    let traces = selected(cfg, &load_traces(cfg, &[])?)?;
    let bundle = load_bundle(cfg)?;
    let models = models_for(&bundle, kind)?;
    let mut base = cfg.run_config(kind, cfg.seed)?;
    if let Some(p) = phi_max {
        base.scheme.phi_max = p;
        base.validate()?;
    }
    let results: Vec<RunResult> = traces
        .iter()
        .map(|t| {
            let mut rc = base;
            rc.seed = run_seed(cfg.seed, &t.trace.id, 0, 0);
            replay(&rc, &t.trace, &models)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<RunRow> = results.iter().map(|r| RunRow::from_result(r, 0)).collect();
    let tag = format!("{}-{}-{}", cfg.mno, cfg.direction, kind);
    let mut written = Vec::new();
    emit(cfg.out_dir.join(format!("replay_runs-{tag}.csv")), rows_csv(&rows)?, &mut written)?;
    emit(cfg.out_dir.join(format!("replay_events-{tag}.csv")), events_csv(&results)?, &mut written)?;
    let summary = ReplaySummary {
        scheme: kind,
        phi_max: base.scheme.phi_max,
        runs: &rows,
        overall: crate::sweep::summarize_point(kind, base.scheme.phi_max, &rows),
    };
    let path = cfg.out_dir.join(format!("replay_summary-{tag}.json"));
    save_json(&path, &summary)?;
    written.push(path);
    Ok(written)
}

pub fn cmd_sweep(cfg: &ProjectConfig, kinds: &[SchemeKind], phi_values: Option<&[f64]>) -> Result<Written> {
    let traces: Vec<Trace> = selected(cfg, &load_traces(cfg, &[])?)?.into_iter().map(|t| t.trace).collect();
    let bundle = load_bundle(cfg)?;
    let grid = phi_values.unwrap_or(&cfg.sweep.phi_max);
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &kind in kinds {
        let models = models_for(&bundle, kind)?;
        let base = cfg.run_config(kind, cfg.seed)?;
        let table = sweep(&base, grid, &traces, cfg.sweep.seeds_per_point, &models)?;
        runs.extend(table.runs);
        points.extend(table.points);
    }
    let tag = format!("{}-{}", cfg.mno, cfg.direction);
    let mut written = Vec::new();
    emit(cfg.out_dir.join(format!("sweep_runs-{tag}.csv")), rows_csv(&runs)?, &mut written)?;
    emit(cfg.out_dir.join(format!("sweep-{tag}.csv")), rows_csv(&points)?, &mut written)?;
    let path = cfg.out_dir.join(format!("sweep_summary-{tag}.json"));
    save_json(&path, &points)?;
    written.push(path);
    Ok(written)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKey {
    Mno,
    Scenario,
}

impl std::str::FromStr for PartitionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mno" => Ok(Self::Mno),
            "scenario" => Ok(Self::Scenario),
            _ => Err(Error::config(format!("partition key must be 'mno' or 'scenario', got '{s}'"))),
        }
    }
}

/// Cross-partition R². Operator partitions share the configured direction;
/// scenario partitions share operator and direction.
pub fn cmd_matrix(cfg: &ProjectConfig, key: PartitionKey) -> Result<Written> {
    let traces = load_traces(cfg, &[])?;
    let mut groups: BTreeMap<String, Vec<TransmissionRecord>> = BTreeMap::new();
    for r in labeled_records(&traces) {
        let c = &r.context;
        if c.direction != cfg.direction || (key == PartitionKey::Scenario && c.mno != cfg.mno) {
            continue;
        }
        let label = match key {
            PartitionKey::Mno => c.mno.clone(),
            PartitionKey::Scenario => c.scenario.clone(),
        };
        groups.entry(label).or_default().push(r);
    }
    if groups.len() < 2 {
        return Err(Error::data(format!("matrix needs at least two partitions, found {}", groups.len())));
    }
    let parts: Vec<Partition> =
        groups.into_iter().map(|(label, recs)| Partition { label, rows: rows_of(&recs) }).collect();
    let trainer = ParallelForestTrainer { params: cfg.training.forest.clone() };
    let m = cross_matrix(&parts, cfg.training.folds, &trainer, cfg.seed)?;
    let name = match key {
        PartitionKey::Mno => format!("matrix-mno-{}.csv", cfg.direction),
        PartitionKey::Scenario => format!("matrix-scenario-{}-{}.csv", cfg.mno, cfg.direction),
    };
    let mut written = Vec::new();
    emit(cfg.out_dir.join(name), matrix_csv(&m)?, &mut written)?;
    Ok(written)
}

#[derive(Serialize)]
struct SimilarityRow {
    scheme: String,
    similarity: f64,
    n_real: usize,
    n_simulated: usize,
}

/// Per-scheme ECDF similarity between two `scheme,rate_mbits` files, plus
/// an `overall` row holding the mean.
pub fn cmd_validate(cfg: &ProjectConfig, real: &Path, simulated: &Path) -> Result<Written> {
    let (a, b) = (read_rates_file(real)?, read_rates_file(simulated)?);
    if let Some(k) = a.keys().find(|k| !b.contains_key(*k)) {
        return Err(Error::data(format!("scheme '{k}' missing from {}", simulated.display())));
    }
    if let Some(k) = b.keys().find(|k| !a.contains_key(*k)) {
        return Err(Error::data(format!("scheme '{k}' missing from {}", real.display())));
    }
    let mut rows = Vec::new();
    for (k, ra) in &a {
        let rb = &b[k];
        let similarity = ecdf_similarity(ra, rb).map_err(|e| Error::from(e).context(format!("scheme '{k}'")))?;
        rows.push(SimilarityRow { scheme: k.clone(), similarity, n_real: ra.len(), n_simulated: rb.len() });
    }
    let overall = rows.iter().map(|r| r.similarity).sum::<f64>() / rows.len() as f64;
    rows.push(SimilarityRow {
        scheme: "overall".into(),
        similarity: overall,
        n_real: rows.iter().map(|r| r.n_real).sum(),
        n_simulated: rows.iter().map(|r| r.n_simulated).sum(),
    });
    let mut written = Vec::new();
    emit(cfg.out_dir.join("validation.csv"), rows_csv(&rows)?, &mut written)?;
    Ok(written)
}

pub fn cmd_bench(cfg: &ProjectConfig, kind: SchemeKind, repetitions: usize) -> Result<Written> {
    let traces = selected(cfg, &load_traces(cfg, &[])?)?;
    let bundle = load_bundle(cfg)?;
    let models = models_for(&bundle, kind)?;
    let rc = cfg.run_config(kind, cfg.seed)?;
    let trace = &traces[0].trace;
    let stats = benchmark(&rc, trace, &models, repetitions)?;
    #[derive(Serialize)]
    struct Bench<'a> {
        scheme: SchemeKind,
        trace_id: &'a str,
        simulated_s: f64,
        #[serde(flatten)]
        stats: crate::sweep::BenchStats,
    }
    let path = cfg.out_dir.join(format!("bench-{}-{}-{kind}.json", cfg.mno, cfg.direction));
    save_json(&path, &Bench { scheme: kind, trace_id: &trace.id, simulated_s: trace.duration(), stats })?;
    Ok(vec![path])
}
