use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureRow, Regressor, N_FEATURES};
use crate::datagen::read_prediction_table;
use crate::error::{CopError, Result};

/// Predictions produced outside this crate, looked up by config.
///
/// Exact lattice hits return the stored value; anything else falls back to
/// the nearest stored config (lowest row on ties), so lookups are total.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "ExternalTableRepr", into = "ExternalTableRepr")]
pub struct ExternalTable {
    entries: Vec<FeatureRow>,
    index: HashMap<[i64; N_FEATURES], usize>,
}

#[derive(Serialize, Deserialize)]
struct ExternalTableRepr {
    entries: Vec<FeatureRow>,
}

impl From<ExternalTableRepr> for ExternalTable {
    fn from(r: ExternalTableRepr) -> Self {
        Self::from_entries(r.entries)
    }
}

impl From<ExternalTable> for ExternalTableRepr {
    fn from(t: ExternalTable) -> Self {
        Self { entries: t.entries }
    }
}

impl PartialEq for ExternalTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

fn key(x: &[f64; N_FEATURES]) -> [i64; N_FEATURES] {
    x.map(|v| (v * 1e6).round() as i64)
}

impl ExternalTable {
    fn from_entries(entries: Vec<FeatureRow>) -> Self {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            index.entry(key(&e.x)).or_insert(i);
        }
        Self { entries, index }
    }

    pub fn new(entries: Vec<FeatureRow>) -> Result<Self> {
        if entries.is_empty() {
            return Err(CopError::Fit("external prediction table is empty".into()));
        }
        if entries.iter().any(|r| !r.is_finite()) {
            return Err(CopError::Fit("external prediction table has non-finite rows".into()));
        }
        Ok(Self::from_entries(entries))
    }

    /// Loads a `cio1..hom3,mean_sinr_db` CSV.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let entries = read_prediction_table(path)?
            .into_iter()
            .map(|(x, y)| FeatureRow { x, y })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Regressor for ExternalTable {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        if let Some(&i) = self.index.get(&key(x)) {
            return self.entries[i].y;
        }
        let mut best = (f64::INFINITY, 0);
        for (i, e) in self.entries.iter().enumerate() {
            let d2: f64 = e.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        self.entries[best.1].y
    }
}
