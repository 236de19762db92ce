//! Project configuration: where traces and models live, training and run
//! parameters, sweep grid. Relative paths resolve against the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ddns_core::connmap::DEFAULT_CELL_SIZE_M;
use ddns_core::derivation::DerivationConfig;
use ddns_core::engine::{DelayMode, RateAggregation, RunConfig, DEFAULT_SOURCE_RATE_KBYTE_S};
use ddns_core::regression::ForestParams;
use ddns_core::schemes::{SchemeConfig, SchemeKind};
use ddns_core::trace::{Direction, GeoPoint, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::ColumnMap;
use crate::error::{read_to_string, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub forest: ForestParams,
    pub folds: usize,
    pub derivation: DerivationConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { forest: ForestParams::default(), folds: 10, derivation: DerivationConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub cell_size_m: f64,
    /// Payload assumed when predicting the rate layer.
    pub payload_mb: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { cell_size_m: DEFAULT_CELL_SIZE_M, payload_mb: 1.0 }
    }
}

/// Per-kind overrides of the default scheme parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeOverrides {
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub tau_s: Option<f64>,
    pub t_min_s: Option<f64>,
    pub t_max_s: Option<f64>,
    pub evaluation_rate_hz: Option<f64>,
    pub period_s: Option<f64>,
}

impl SchemeOverrides {
    fn apply(&self, c: &mut SchemeConfig) {
        let pairs = [
            (self.phi_min, &mut c.phi_min),
            (self.phi_max, &mut c.phi_max),
            (self.alpha, &mut c.alpha),
            (self.gamma, &mut c.gamma),
            (self.tau_s, &mut c.tau_s),
            (self.t_min_s, &mut c.t_min_s),
            (self.t_max_s, &mut c.t_max_s),
            (self.evaluation_rate_hz, &mut c.evaluation_rate_hz),
            (self.period_s, &mut c.period_s),
        ];
        for (v, slot) in pairs {
            if let Some(v) = v {
                *slot = v;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub source_rate_kbyte_s: f64,
    pub delay_mode: DelayMode,
    pub rate_aggregation: RateAggregation,
    pub schemes: BTreeMap<SchemeKind, SchemeOverrides>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            source_rate_kbyte_s: DEFAULT_SOURCE_RATE_KBYTE_S,
            delay_mode: DelayMode::Half,
            rate_aggregation: RateAggregation::PerTransmission,
            schemes: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub phi_max: Vec<f64>,
    pub seeds_per_point: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { phi_max: (1..=10).map(|i| 5.0 * i as f64).collect(), seeds_per_point: 25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: u64,
    /// Reference point of the planar projection shared by all traces.
    pub origin: GeoPoint,
    /// Trace CSV files, or directories whose `*.csv` files are all used.
    pub traces: Vec<PathBuf>,
    pub columns: ColumnMap,
    pub out_dir: PathBuf,
    pub model_dir: PathBuf,
    /// Explicit model files keyed `"<mno>/<direction>"`.
    pub models: BTreeMap<String, PathBuf>,
    pub mno: String,
    pub direction: Direction,
    pub training: TrainingConfig,
    pub map: MapConfig,
    pub run: RunSettings,
    pub sweep: SweepSettings,
    /// Scenarios produced by `synth`.
    pub synth: Vec<ScenarioConfig>,
    pub jobs: Option<usize>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            origin: ScenarioConfig::default().origin,
            traces: vec![PathBuf::from("traces")],
            columns: ColumnMap::default(),
            out_dir: PathBuf::from("out"),
            model_dir: PathBuf::from("models"),
            models: BTreeMap::new(),
            mno: "A".into(),
            direction: Direction::Uplink,
            training: TrainingConfig::default(),
            map: MapConfig::default(),
            run: RunSettings::default(),
            sweep: SweepSettings::default(),
            synth: Vec::new(),
            jobs: None,
        }
    }
}

fn binding_key(mno: &str, direction: Direction) -> String {
    format!("{mno}/{direction}")
}

impl ProjectConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path).map_err(|e| Error::config(e.message))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_json(&text, base).map_err(|e| e.context(path.display()))
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.traces.iter_mut().for_each(fix);
        self.models.values_mut().for_each(fix);
        fix(&mut self.out_dir);
        fix(&mut self.model_dir);
    }

    pub fn validate(&self) -> Result<()> {
        GeoPoint::new(self.origin.lat, self.origin.lon)?;
        if self.training.folds < 2 {
            return Err(Error::config("training.folds must be >= 2"));
        }
        if !(self.map.cell_size_m > 0.0 && self.map.payload_mb > 0.0) {
            return Err(Error::config("map cell size and payload must be > 0"));
        }
        if self.sweep.seeds_per_point == 0 {
            return Err(Error::config("sweep.seeds_per_point must be >= 1"));
        }
        for key in self.models.keys() {
            let ok = key.split_once('/').is_some_and(|(_, d)| d.parse::<Direction>().is_ok());
            if !ok {
                return Err(Error::config(format!("model binding key '{key}' is not '<mno>/<direction>'")));
            }
        }
        for kind in SchemeKind::ALL {
            self.scheme_config(kind)?;
        }
        self.run_config(SchemeKind::Periodic, 0)?;
        Ok(())
    }

    pub fn model_path(&self, mno: &str, direction: Direction) -> PathBuf {
        self.models
            .get(&binding_key(mno, direction))
            .cloned()
            .unwrap_or_else(|| self.model_dir.join(format!("model-{mno}-{direction}.json")))
    }

    pub fn scheme_config(&self, kind: SchemeKind) -> Result<SchemeConfig> {
        let mut c = SchemeConfig::with_defaults(kind, &self.mno, self.direction);
        if let Some(o) = self.run.schemes.get(&kind) {
            o.apply(&mut c);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn run_config(&self, kind: SchemeKind, seed: u64) -> Result<RunConfig> {
        let rc = RunConfig {
            scheme: self.scheme_config(kind)?,
            source_rate_kbyte_s: self.run.source_rate_kbyte_s,
            seed,
            delay_mode: self.run.delay_mode,
            rate_aggregation: self.run.rate_aggregation,
        };
        rc.validate()?;
        Ok(rc)
    }

    /// Trace files in a stable order.
    pub fn trace_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for p in &self.traces {
            if p.is_dir() {
                let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| Error::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                    .collect();
                inner.sort();
                files.extend(inner);
            } else if p.is_file() {
                files.push(p.clone());
            } else {
                return Err(Error::config(format!("trace path {} does not exist", p.display())));
            }
        }
        if files.is_empty() {
            return Err(Error::data("no trace files found"));
        }
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_uses_defaults() {
        let cfg = ProjectConfig::from_json(
            r#"{"seed": 7, "traces": ["t"], "run": {"schemes": {"CAT": {"phi_max": 12.5}}}, "training": {"forest": {"n_trees": 8}}}"#,
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.traces, [PathBuf::from("/base/t")]);
        assert_eq!(cfg.training.forest.n_trees, 8);
        assert_eq!(cfg.training.forest.max_depth, 20);
        assert_eq!(cfg.scheme_config(SchemeKind::Cat).unwrap().phi_max, 12.5);
        assert_eq!(cfg.scheme_config(SchemeKind::Pcat).unwrap().phi_max, 30.0);
        assert_eq!(cfg.model_path("A", Direction::Uplink), PathBuf::from("/base/models/model-A-uplink.json"));
    }

    #[test]
    fn rejects_bad_documents() {
        let base = Path::new(".");
        assert!(ProjectConfig::from_json(r#"{"bogus": 1}"#, base).is_err());
        assert!(ProjectConfig::from_json(r#"{"run": {"schemes": {"CAT": {"t_min_s": 500}}}}"#, base).is_err());
        assert!(ProjectConfig::from_json(r#"{"models": {"A": "x.json"}}"#, base).is_err());
        let e = ProjectConfig::from_json("{", base).unwrap_err();
        assert_eq!(e.kind, crate::error::ErrorKind::Config);
    }
}
