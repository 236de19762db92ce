//! Trace files: one CSV per drive, one row per context sample, optionally
//! labeled with the measured data rate.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ddns_core::trace::{project_position, ContextSample, Direction, GeoPoint, Trace, TransmissionRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 17] = [
    "t", "payload_mb", "rsrp", "rsrq", "sinr", "cqi", "ta", "freq_mhz", "velocity_kmh", "cell_id",
    "enb_id", "lat", "lon", "mno", "scenario", "direction", "rate_mbits",
];

const LABEL_COLUMN: usize = 16;

/// Maps canonical column names to the headers used by a foreign file.
/// Columns not listed are expected under their canonical name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap(pub BTreeMap<String, String>);

impl ColumnMap {
    pub fn source_name<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.0.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    fn validate(&self) -> Result<()> {
        match self.0.keys().find(|k| !CSV_COLUMNS.contains(&k.as_str())) {
            Some(k) => Err(Error::config(format!("column map names unknown column '{k}'"))),
            None => Ok(()),
        }
    }
}

/// A trace plus the optional per-sample rate label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrace {
    pub trace: Trace,
    pub labels: Vec<Option<f64>>,
}

impl LabeledTrace {
    /// Pairs a generated trace with records covering every sample in order.
    pub fn fully_labeled(trace: Trace, records: &[TransmissionRecord]) -> Result<Self> {
        if records.len() != trace.len() {
            return Err(Error::data(format!("{} records for {} samples", records.len(), trace.len())));
        }
        let labels = records.iter().map(|r| Some(r.data_rate)).collect();
        Ok(Self { trace, labels })
    }

    pub fn records(&self) -> Vec<TransmissionRecord> {
        self.trace
            .samples()
            .iter()
            .zip(&self.labels)
            .filter_map(|(s, y)| y.map(|data_rate| TransmissionRecord { context: s.clone(), data_rate }))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Trace id derived from a file name.
pub fn trace_id_from_path(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into())
}

pub fn read_trace_csv(path: &Path, columns: &ColumnMap, origin: GeoPoint) -> Result<LabeledTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace_csv(file, &trace_id_from_path(path), columns, origin)
        .map_err(|e| e.context(path.display()))
}

fn field(rec: &csv::StringRecord, idx: usize) -> &str {
    rec.get(idx).unwrap_or("").trim()
}

pub fn parse_trace_csv<R: Read>(reader: R, id: &str, columns: &ColumnMap, origin: GeoPoint) -> Result<LabeledTrace> {
    columns.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data(format!("header: {e}")))?.clone();
    let mut index = [usize::MAX; CSV_COLUMNS.len()];
    for (c, canonical) in CSV_COLUMNS.iter().enumerate() {
        let wanted = columns.source_name(canonical);
        match headers.iter().position(|h| h.trim() == wanted) {
            Some(i) => index[c] = i,
            None if c == LABEL_COLUMN => {}
            None => return Err(Error::data(format!("missing column '{wanted}'"))),
        }
    }

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::data(format!("line {}: {e}", e.position().map_or(0, |p| p.line()))))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| Error::data(format!("line {line}: {msg}"));
        let num = |c: usize| -> Result<f64> {
            let raw = field(&rec, index[c]);
            raw.parse::<f64>().map_err(|_| at(format!("column {}: cannot parse '{raw}' as number", CSV_COLUMNS[c])))
        };
        let int = |c: usize| -> Result<u64> {
            let raw = field(&rec, index[c]);
            raw.parse::<u64>().map_err(|_| at(format!("column {}: cannot parse '{raw}' as integer", CSV_COLUMNS[c])))
        };
        let geo = GeoPoint::new(num(11)?, num(12)?).map_err(|e| at(e.to_string()))?;
        let direction: Direction = field(&rec, index[15]).parse().map_err(|e: ddns_core::Error| at(e.to_string()))?;
        let sample = ContextSample {
            timestamp: num(0)?,
            payload_size: num(1)?,
            rsrp: num(2)?,
            rsrq: num(3)?,
            sinr: num(4)?,
            cqi: num(5)?,
            ta: num(6)?,
            carrier_freq: num(7)?,
            velocity: num(8)?,
            cell_id: int(9)?,
            enb_id: int(10)?,
            geo,
            position: project_position(geo, origin).map_err(|e| at(e.to_string()))?,
            mno: field(&rec, index[13]).to_string(),
            scenario: field(&rec, index[14]).to_string(),
            direction,
        };
        sample.validate().map_err(at)?;
        let label = match index[LABEL_COLUMN] {
            usize::MAX => None,
            i if field(&rec, i).is_empty() => None,
            _ => {
                let y = num(LABEL_COLUMN)?;
                if !(y > 0.0 && y.is_finite()) {
                    return Err(at(format!("rate_mbits must be > 0, got {y}")));
                }
                Some(y)
            }
        };
        samples.push(sample);
        labels.push(label);
        lines.push(line);
    }
    let trace = Trace::new(id, samples).map_err(|e| match e {
        ddns_core::Error::NonMonotoneTimestamps { index } => Error::data(format!(
            "line {}: timestamps not strictly increasing at row index {index}",
            lines[index]
        )),
        ddns_core::Error::InvalidSample { index, reason } => Error::data(format!("line {}: {reason}", lines[index])),
        other => other.into(),
    })?;
    Ok(LabeledTrace { trace, labels })
}

/// Writes the canonical CSV layout. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_trace_csv<W: Write>(writer: W, data: &LabeledTrace) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let err = |e: csv::Error| Error::data(format!("csv write: {e}"));
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for (s, y) in data.trace.samples().iter().zip(&data.labels) {
        w.write_record([
            s.timestamp.to_string(),
            s.payload_size.to_string(),
            s.rsrp.to_string(),
            s.rsrq.to_string(),
            s.sinr.to_string(),
            s.cqi.to_string(),
            s.ta.to_string(),
            s.carrier_freq.to_string(),
            s.velocity.to_string(),
            s.cell_id.to_string(),
            s.enb_id.to_string(),
            s.geo.lat.to_string(),
            s.geo.lon.to_string(),
            s.mno.clone(),
            s.scenario.clone(),
            s.direction.to_string(),
            y.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::data(format!("csv write: {e}")))
}

pub fn save_trace_csv(path: &Path, data: &LabeledTrace) -> Result<()> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, data)?;
    crate::error::write_file(path, buf)
}
