//! Versioned JSON model document: forest, derivation model and an optional
//! connectivity map for one operator and link direction.

use std::collections::BTreeMap;
use std::path::Path;

use ddns_core::connmap::{CellAggregate, ConnectivityMap, GridKey, PredictionLayer};
use ddns_core::derivation::{DerivationModel, DerivationState};
use ddns_core::regression::{RegressionForest, FEATURE_COUNT};
use ddns_core::trace::Direction;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_file, Error, Result};

pub const FORMAT: &str = "ddns-model";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub kx: i64,
    pub ky: i64,
    pub count: u64,
    pub means: [f64; FEATURE_COUNT],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTable {
    pub mno: String,
    pub direction: Direction,
    pub payload_mb: f64,
    /// `(kx, ky, predicted rate)` rows.
    pub values: Vec<(i64, i64, f64)>,
}

/// Keyed-table form of a [`ConnectivityMap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapTable {
    pub cell_size: f64,
    pub cells: Vec<CellRow>,
    pub layers: Vec<LayerTable>,
}

impl MapTable {
    pub fn from_map(map: &ConnectivityMap) -> Self {
        Self {
            cell_size: map.cell_size(),
            cells: map
                .cells()
                .map(|(k, c)| CellRow { kx: k.kx, ky: k.ky, count: c.count, means: c.means })
                .collect(),
            layers: map
                .layers()
                .iter()
                .map(|l| LayerTable {
                    mno: l.mno.clone(),
                    direction: l.direction,
                    payload_mb: l.payload_mb,
                    values: l.values.iter().map(|(k, v)| (k.kx, k.ky, *v)).collect(),
                })
                .collect(),
        }
    }

    pub fn to_map(&self) -> Result<ConnectivityMap> {
        let mut cells = BTreeMap::new();
        for c in &self.cells {
            if cells.insert(GridKey::new(c.kx, c.ky), CellAggregate { count: c.count, means: c.means }).is_some() {
                return Err(Error::model(format!("duplicate map cell ({}, {})", c.kx, c.ky)));
            }
        }
        let layers = self
            .layers
            .iter()
            .map(|l| PredictionLayer {
                mno: l.mno.clone(),
                direction: l.direction,
                payload_mb: l.payload_mb,
                values: l.values.iter().map(|(x, y, v)| (GridKey::new(*x, *y), *v)).collect(),
            })
            .collect();
        ConnectivityMap::from_parts(self.cell_size, cells, layers).map_err(|e| Error::model(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub mno: String,
    pub direction: Direction,
    pub forest: RegressionForest,
    pub derivation: DerivationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapTable>,
}

/// Loaded, validated model artifacts.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub forest: RegressionForest,
    pub derivation: DerivationModel,
    pub map: Option<ConnectivityMap>,
}

impl ModelBundle {
    pub fn mno(&self) -> &str {
        self.forest.meta.mno.as_deref().unwrap_or("")
    }

    pub fn direction(&self) -> Option<Direction> {
        self.forest.meta.direction
    }

    pub fn to_document(&self) -> Result<ModelDocument> {
        let (Some(mno), Some(direction)) = (self.forest.meta.mno.clone(), self.forest.meta.direction) else {
            return Err(Error::model("forest lacks operator/direction provenance"));
        };
        Ok(ModelDocument {
            format: FORMAT.into(),
            version: VERSION,
            mno,
            direction,
            forest: self.forest.clone(),
            derivation: self.derivation.state().clone(),
            map: self.map.as_ref().map(MapTable::from_map),
        })
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != FORMAT {
            return Err(Error::model(format!("not a model document (format '{}')", doc.format)));
        }
        if doc.version != VERSION {
            return Err(Error::model(format!("unsupported model document version {}", doc.version)));
        }
        doc.forest.validate().map_err(|e| Error::model(e.to_string()))?;
        if doc.forest.meta.mno.as_deref() != Some(doc.mno.as_str()) || doc.forest.meta.direction != Some(doc.direction) {
            return Err(Error::model("document binding disagrees with forest provenance"));
        }
        let derivation = DerivationModel::from_state(doc.derivation).map_err(|e| Error::model(e.to_string()))?;
        let map = doc.map.as_ref().map(MapTable::to_map).transpose()?;
        Ok(Self { forest: doc.forest, derivation, map })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(&self.to_document()?)
            .map_err(|e| Error::model(format!("serialize model: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::model(format!("parse model document: {e}")))?;
        Self::from_document(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?).map_err(|e| e.context(path.display()))
    }
}
