//! CSV and JSON report writers.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use ddns_core::connmap::ConnectivityMap;
use ddns_core::engine::RunResult;
use ddns_core::regression::{CrossMatrix, FEATURE_NAMES};
use serde::Serialize;

use crate::error::{write_file, Error, Result};

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::data(format!("csv write: {}", e.error())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv write: {e}"))
}

/// One CSV row per serialized item, header from the field names.
pub fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    finish(w)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| Error::data(format!("json write: {e}")))?;
    s.push(b'\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, json_bytes(value)?)
}

#[derive(Serialize)]
struct EventRow<'a> {
    trace_id: &'a str,
    seed: u64,
    time_s: f64,
    payload_mb: f64,
    interval_s: f64,
    predicted_mbits: f64,
    virtual_mbits: f64,
    duration_s: f64,
    buffering_delay_s: f64,
}

pub fn events_csv(results: &[RunResult]) -> Result<Vec<u8>> {
    let rows: Vec<EventRow> = results
        .iter()
        .flat_map(|r| {
            r.events.iter().map(move |e| EventRow {
                trace_id: &r.trace_id,
                seed: r.seed,
                time_s: e.time_s,
                payload_mb: e.payload_mb,
                interval_s: e.interval_s,
                predicted_mbits: e.predicted_mbits,
                virtual_mbits: e.virtual_mbits,
                duration_s: e.duration_s,
                buffering_delay_s: e.buffering_delay_s,
            })
        })
        .collect();
    rows_csv(&rows)
}

/// `train\test` matrix with one row per training partition.
pub fn matrix_csv(m: &CrossMatrix) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    let mut header = vec!["train\\test".to_string()];
    header.extend(m.labels.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (label, row) in m.labels.iter().zip(&m.r2) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Per-cell export of the feature layer plus one column per rate layer.
pub fn map_cells_csv(map: &ConnectivityMap) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    let mut header: Vec<String> = ["kx", "ky", "x_m", "y_m", "count"].iter().map(|s| s.to_string()).collect();
    header.extend(FEATURE_NAMES.iter().map(|n| format!("mean_{n}")));
    header.extend(map.layers().iter().map(|l| format!("rate_{}_{}", l.mno, l.direction)));
    w.write_record(&header).map_err(csv_err)?;
    let c = map.cell_size();
    for (key, cell) in map.cells() {
        let mut rec = vec![
            key.kx.to_string(),
            key.ky.to_string(),
            ((key.kx as f64 + 0.5) * c).to_string(),
            ((key.ky as f64 + 0.5) * c).to_string(),
            cell.count.to_string(),
        ];
        rec.extend(cell.means.iter().map(|v| v.to_string()));
        rec.extend(map.layers().iter().map(|l| l.values.get(key).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

/// Reads `scheme,rate_mbits` rows into per-scheme rate lists.
pub fn read_rates<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data(format!("header: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::data(format!("missing column '{name}'")))
    };
    let (si, ri) = (col("scheme")?, col("rate_mbits")?);
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw = rec.get(ri).unwrap_or("").trim();
        let v: f64 = raw.parse().map_err(|_| Error::data(format!("line {line}: cannot parse rate '{raw}'")))?;
        if !v.is_finite() {
            return Err(Error::data(format!("line {line}: rate is not finite")));
        }
        out.entry(rec.get(si).unwrap_or("").trim().to_string()).or_default().push(v);
    }
    if out.is_empty() {
        return Err(Error::data("no rate rows"));
    }
    Ok(out)
}

pub fn read_rates_file(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rates(f).map_err(|e| e.context(path.display()))
}
