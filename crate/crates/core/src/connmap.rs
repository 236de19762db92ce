//! Connectivity map: a planar grid of aggregated context features (feature
//! layer) plus per-operator predicted rates (prediction layers).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::regression::{Feature, FeatureVector, RegressionForest, Regressor, FEATURE_COUNT};
use crate::trace::{ContextSample, Direction, Position, Trace};
use crate::{Error, Result};

pub const DEFAULT_CELL_SIZE_M: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub kx: i64,
    pub ky: i64,
}

impl GridKey {
    pub fn new(kx: i64, ky: i64) -> Self {
        Self { kx, ky }
    }
}

/// Componentwise `floor(position / cell_size)`.
pub fn grid_key(pos: Position, cell_size: f64) -> Result<GridKey> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!("cell size must be > 0, got {cell_size}")));
    }
    Ok(GridKey {
        kx: libm::floor(pos.x / cell_size) as i64,
        ky: libm::floor(pos.y / cell_size) as i64,
    })
}

/// Running per-feature means of the measurements within one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub count: u64,
    pub means: [f64; FEATURE_COUNT],
}

impl CellAggregate {
    fn push(&mut self, x: &FeatureVector) {
        self.count += 1;
        let n = self.count as f64;
        for (m, v) in self.means.iter_mut().zip(x.0) {
            *m += (v - *m) / n;
        }
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector(self.means)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionLayer {
    pub mno: String,
    pub direction: Direction,
    /// Payload size (MB) assumed when the layer was built.
    pub payload_mb: f64,
    pub values: BTreeMap<GridKey, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityMap {
    cell_size: f64,
    cells: BTreeMap<GridKey, CellAggregate>,
    layers: Vec<PredictionLayer>,
}

impl ConnectivityMap {
    pub fn new(cell_size: f64) -> Result<Self> {
        grid_key(Position::default(), cell_size)?;
        Ok(Self { cell_size, cells: BTreeMap::new(), layers: Vec::new() })
    }

    /// Reassembles a persisted map, checking its invariants.
    pub fn from_parts(
        cell_size: f64,
        cells: BTreeMap<GridKey, CellAggregate>,
        layers: Vec<PredictionLayer>,
    ) -> Result<Self> {
        let map = Self::new(cell_size)?;
        if cells.values().any(|c| c.count == 0) {
            return Err(Error::InvalidConfig("map cell with zero count".to_string()));
        }
        for layer in &layers {
            if layer.values.keys().any(|k| !cells.contains_key(k)) {
                return Err(Error::InvalidConfig("prediction layer entry without feature data".to_string()));
            }
        }
        Ok(Self { cells, layers, ..map })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&GridKey, &CellAggregate)> {
        self.cells.iter()
    }

    pub fn layers(&self) -> &[PredictionLayer] {
        &self.layers
    }

    pub fn key(&self, pos: Position) -> GridKey {
        GridKey {
            kx: libm::floor(pos.x / self.cell_size) as i64,
            ky: libm::floor(pos.y / self.cell_size) as i64,
        }
    }

    pub fn insert_measurement(&mut self, sample: &ContextSample) {
        let key = self.key(sample.position);
        self.cells
            .entry(key)
            .or_insert(CellAggregate { count: 0, means: [0.0; FEATURE_COUNT] })
            .push(&sample.features());
    }

    pub fn insert_trace(&mut self, trace: &Trace) {
        for s in trace.samples() {
            self.insert_measurement(s);
        }
    }

    pub fn cell(&self, key: GridKey) -> Option<&CellAggregate> {
        self.cells.get(&key)
    }

    /// Predicts every cell from its feature means with the payload replaced
    /// by `payload_mb`; replaces any layer for the same operator and direction.
    pub fn build_prediction_layer(&mut self, model: &RegressionForest, payload_mb: f64) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::EmptyInput("feature layer is empty"));
        }
        model.validate()?;
        let (Some(mno), Some(direction)) = (model.meta.mno.clone(), model.meta.direction) else {
            return Err(Error::ModelMismatch("forest has no operator/direction provenance".to_string()));
        };
        if !(payload_mb > 0.0) {
            return Err(Error::InvalidConfig("payload assumption must be > 0".to_string()));
        }
        let values = self
            .cells
            .iter()
            .map(|(k, c)| (*k, model.predict(&c.features().with(Feature::PayloadSize, payload_mb))))
            .collect();
        self.layers.retain(|l| !(l.mno == mno && l.direction == direction));
        self.layers.push(PredictionLayer { mno, direction, payload_mb, values });
        self.layers.sort_by(|a, b| (&a.mno, a.direction).cmp(&(&b.mno, b.direction)));
        Ok(())
    }

    pub fn layer(&self, mno: &str, direction: Direction) -> Option<&PredictionLayer> {
        self.layers.iter().find(|l| l.mno == mno && l.direction == direction)
    }

    /// Predicted rate at a (future) position; `None` for unobserved cells.
    pub fn query_future(&self, pos: Position, mno: &str, direction: Direction) -> Option<f64> {
        self.layer(mno, direction)?.values.get(&self.key(pos)).copied()
    }

    /// Aggregated context at a (future) position; `None` for unobserved cells.
    pub fn query_features(&self, pos: Position) -> Option<&CellAggregate> {
        self.cells.get(&self.key(pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{train_forest, ForestParams, LabeledRow};
    use crate::rng::rng_from_seed;
    use crate::trace::tests::sample;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn at(x: f64, y: f64, sinr: f64) -> ContextSample {
        let mut s = sample(0.0);
        s.position = Position::new(x, y);
        s.sinr = sinr;
        s
    }

    #[test]
    fn grid_key_examples() {
        assert_eq!(grid_key(Position::new(0.0, 0.0), 25.0).unwrap(), GridKey::new(0, 0));
        assert_eq!(grid_key(Position::new(125.3, 47.9), 25.0).unwrap(), GridKey::new(5, 1));
        assert_eq!(grid_key(Position::new(-0.1, 0.0), 25.0).unwrap(), GridKey::new(-1, 0));
        assert_eq!(grid_key(Position::new(25.0, 0.0), 25.0).unwrap(), GridKey::new(1, 0));
        assert!(grid_key(Position::default(), 0.0).is_err());
        assert!(grid_key(Position::default(), -5.0).is_err());
    }

    #[test]
    fn running_means() {
        let mut m = ConnectivityMap::new(25.0).unwrap();
        m.insert_measurement(&at(1.0, 1.0, 10.0));
        let c = m.cell(GridKey::new(0, 0)).unwrap();
        assert_eq!(c.features(), at(1.0, 1.0, 10.0).features());
        m.insert_measurement(&at(2.0, 3.0, 20.0));
        let c = m.cell(GridKey::new(0, 0)).unwrap();
        assert_eq!((c.count, c.means[Feature::Sinr.index()]), (2, 15.0));
    }

    #[test]
    fn random_inserts_match_batch_means() {
        let mut rng = rng_from_seed(4);
        let samples: Vec<_> = (0..1000)
            .map(|_| at(rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0, rng.random::<f64>() * 40.0 - 5.0))
            .collect();
        let mut m = ConnectivityMap::new(25.0).unwrap();
        samples.iter().for_each(|s| m.insert_measurement(s));
        for (key, cell) in m.cells() {
            let inside: Vec<_> = samples.iter().filter(|s| m.key(s.position) == *key).collect();
            assert_eq!(cell.count as usize, inside.len());
            let batch = inside.iter().map(|s| s.sinr).sum::<f64>() / inside.len() as f64;
            assert!((cell.means[Feature::Sinr.index()] - batch).abs() < 1e-9);
        }
    }

    fn forest(rows: &[LabeledRow]) -> RegressionForest {
        train_forest(rows, &ForestParams { n_trees: 5, ..Default::default() }, 1)
            .unwrap()
            .with_provenance("A", Direction::Uplink)
    }

    #[test]
    fn prediction_layer_matches_manual_assembly() {
        let mut m = ConnectivityMap::new(25.0).unwrap();
        for (x, s) in [(5.0, 0.0), (30.0, 10.0), (60.0, 25.0), (61.0, 27.0)] {
            m.insert_measurement(&at(x, 0.0, s));
        }
        assert_eq!(m.len(), 3);
        let rows: Vec<_> = (0..60)
            .map(|i| {
                let s = at(0.0, 0.0, i as f64 * 0.5);
                LabeledRow::new(s.features().with(Feature::PayloadSize, 0.5 + (i % 5) as f64), 1.0 + i as f64)
            })
            .collect();
        let f = forest(&rows);
        m.build_prediction_layer(&f, 2.0).unwrap();
        for (key, cell) in m.cells() {
            let manual = f.predict(&FeatureVector(cell.means).with(Feature::PayloadSize, 2.0));
            let got = m.layer("A", Direction::Uplink).unwrap().values[key];
            assert!((manual - got).abs() <= 1e-12);
        }
        assert_eq!(m.query_future(Position::new(26.0, 3.0), "A", Direction::Uplink), m.layer("A", Direction::Uplink).unwrap().values.get(&GridKey::new(1, 0)).copied());
        assert_eq!(m.query_future(Position::new(500.0, 500.0), "A", Direction::Uplink), None);
        assert_eq!(m.query_future(Position::new(5.0, 0.0), "B", Direction::Uplink), None);

        let before = m.layers().to_vec();
        m.build_prediction_layer(&f, 2.0).unwrap();
        assert_eq!(before, m.layers());
    }

    #[test]
    fn constant_forest_constant_layer() {
        let mut m = ConnectivityMap::new(25.0).unwrap();
        for i in 0..10 {
            m.insert_measurement(&at(i as f64 * 30.0, 0.0, i as f64));
        }
        let rows = vec![LabeledRow::new(at(0.0, 0.0, 1.0).features(), 4.5); 3];
        m.build_prediction_layer(&forest(&rows), 2.0).unwrap();
        assert!(m.layers()[0].values.values().all(|v| *v == 4.5));
    }

    #[test]
    fn layer_errors() {
        let rows = vec![LabeledRow::new(at(0.0, 0.0, 1.0).features(), 4.5); 3];
        let mut empty = ConnectivityMap::new(25.0).unwrap();
        assert!(empty.build_prediction_layer(&forest(&rows), 2.0).is_err());
        empty.insert_measurement(&at(0.0, 0.0, 1.0));
        let bare = train_forest(&rows, &ForestParams { n_trees: 1, ..Default::default() }, 0).unwrap();
        assert!(matches!(empty.build_prediction_layer(&bare, 2.0), Err(Error::ModelMismatch(_))));
        let mut bad = forest(&rows);
        bad.feature_names.swap(0, 1);
        assert!(matches!(empty.build_prediction_layer(&bad, 2.0), Err(Error::ModelMismatch(_))));
    }

    proptest! {
        #[test]
        fn translation_consistent(x in -1e5..1e5f64, y in -1e5..1e5f64, c in 0.5..200.0f64) {
            let k = grid_key(Position::new(x, y), c).unwrap();
            let shifted = grid_key(Position::new(x + c, y), c).unwrap();
            // x + c can round onto a cell boundary; allow that single case
            prop_assert!(shifted == GridKey::new(k.kx + 1, k.ky) || ((x + c) / c).fract() == 0.0);
        }

        #[test]
        fn insertion_order_irrelevant(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let mut samples: Vec<_> = (0..200)
                .map(|_| at(rng.random::<f64>() * 80.0, rng.random::<f64>() * 80.0, rng.random::<f64>() * 30.0))
                .collect();
            let mut a = ConnectivityMap::new(25.0).unwrap();
            samples.iter().for_each(|s| a.insert_measurement(s));
            samples.shuffle(&mut rng);
            let mut b = ConnectivityMap::new(25.0).unwrap();
            samples.iter().for_each(|s| b.insert_measurement(s));
            for ((ka, ca), (kb, cb)) in a.cells().zip(b.cells()) {
                prop_assert_eq!(ka, kb);
                prop_assert_eq!(ca.count, cb.count);
                for (x, y) in ca.means.iter().zip(cb.means) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
