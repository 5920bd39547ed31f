//! Parameter-grid sweeps: the `config -> mean SINR` training table.

mod grid;
mod sweep;
mod table;

use serde::{Deserialize, Serialize};

use crate::scenario::MobilityConfig;

pub use grid::{enumerate_grid, GridIter, ParameterGrid, ENUMERATION_LIMIT};
pub use sweep::{run_sweep, subsample, subsample_indices, SWEEP_LIMIT};
pub use table::{read_prediction_table, DATASET_COLUMNS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub config: MobilityConfig,
    /// NaN when every user of the gathering set is in outage.
    pub mean_sinr_db: f64,
    pub outage_count: u64,
}

impl SweepRecord {
    pub fn is_full_outage(&self) -> bool {
        self.mean_sinr_db.is_nan()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepDataset {
    pub records: Vec<SweepRecord>,
    /// Seed of the scenario the sweep ran on, when known.
    pub scenario_seed: Option<u64>,
    /// Grid the sweep enumerated, when known.
    pub grid: Option<ParameterGrid>,
    pub schema_version: u32,
}

impl SweepDataset {
    pub fn new(records: Vec<SweepRecord>) -> Self {
        Self {
            records,
            scenario_seed: None,
            grid: None,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record with the highest finite KPI (first in order on ties).
    pub fn best(&self) -> Option<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| !r.is_full_outage())
            .fold(None, |best: Option<&SweepRecord>, r| match best {
                Some(b) if b.mean_sinr_db >= r.mean_sinr_db => Some(b),
                _ => Some(r),
            })
    }

    /// Keeps the records at `indices` (which must be sorted and in range),
    /// preserving metadata.
    pub fn select(&self, indices: &[usize]) -> SweepDataset {
        SweepDataset {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> SweepDataset {
        SweepDataset {
            records: Vec::new(),
            scenario_seed: self.scenario_seed,
            grid: self.grid,
            schema_version: self.schema_version,
        }
    }
}
