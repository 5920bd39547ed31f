//! Regression surrogates for the `config -> mean SINR` mapping.
//!
//! Three model families are fitted in-crate (least squares, k-nearest
//! neighbours, gradient-boosted trees); a fourth, [`ExternalTable`], imports
//! predictions made by any outside model so it can drive the optimiser too.

mod evaluation;
mod external;
mod gbrt;
mod knn;
mod linear;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::SweepDataset;
use crate::error::{CopError, Result};
use crate::scenario::MobilityConfig;

pub use evaluation::{
    evaluate_models, train_model, write_reports_csv, EvaluationCell, ModelSpec, TEST_FRACTION,
};
pub use external::ExternalTable;
pub use gbrt::{fit_gbrt, GbrtModel, GbrtParams, RegressionTree, TreeNode};
pub use knn::{fit_knn, KnnModel};
pub use linear::{fit_linear, LinearModel};

pub const N_FEATURES: usize = 6;

/// One training example: the six mobility genes and the observed KPI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub x: [f64; N_FEATURES],
    pub y: f64,
}

impl FeatureRow {
    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// Feature rows of a dataset; full-outage records carry no KPI and are
/// skipped.
pub fn feature_rows(dataset: &SweepDataset) -> Vec<FeatureRow> {
    dataset
        .records
        .iter()
        .filter(|r| !r.is_full_outage())
        .map(|r| FeatureRow {
            x: r.config.genes(),
            y: r.mean_sinr_db,
        })
        .collect()
}

pub trait Regressor {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64;
}

/// Seeded shuffle split into `(train, test)`. Each side keeps the original
/// row order; the test side gets `round(test_fraction * n)` rows.
pub fn split(
    rows: &[FeatureRow],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureRow>, Vec<FeatureRow>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CopError::Config(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = rows.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(CopError::Config(format!(
            "splitting {n} rows at {test_fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = rows.iter().zip(&is_test).partition(|(_, &t)| t);
    Ok((
        train.into_iter().map(|(r, _)| *r).collect(),
        test.into_iter().map(|(r, _)| *r).collect(),
    ))
}

/// Root mean squared prediction error over `rows`.
pub fn rmse(model: &impl Regressor, rows: &[FeatureRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(CopError::Config("rmse over zero rows".into()));
    }
    let sse: f64 = rows
        .iter()
        .map(|r| (model.predict_row(&r.x) - r.y).powi(2))
        .sum();
    Ok((sse / rows.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Knn(KnnModel),
    Gbrt(GbrtModel),
    External(ExternalTable),
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Knn(_) => "knn",
            Model::Gbrt(_) => "gbrt",
            Model::External(_) => "external",
        }
    }
}

impl Regressor for Model {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        match self {
            Model::Linear(m) => m.predict_row(x),
            Model::Knn(m) => m.predict_row(x),
            Model::Gbrt(m) => m.predict_row(x),
            Model::External(m) => m.predict_row(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model_name: String,
    pub rmse_train: f64,
    pub rmse_test: f64,
    pub train_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

const MODEL_FORMAT: &str = "copkit-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    trained: TrainedModel,
}

/// A fitted model plus the report of how it was fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: Model,
    pub report: FitReport,
}

impl TrainedModel {
    /// Predicted mean SINR for a config. Out-of-range genes are clamped
    /// into the parameter box (with a warning) before prediction.
    pub fn predict(&self, config: &MobilityConfig) -> f64 {
        self.predict_genes(config.genes())
    }

    pub fn predict_genes(&self, genes: [f64; N_FEATURES]) -> f64 {
        let (config, clamped) = MobilityConfig::from_genes_clamped(genes);
        if clamped {
            log::warn!("config {genes:?} outside the parameter box, clamped");
        }
        self.model.predict_row(&config.genes())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            trained: self.clone(),
        };
        serde_json::to_string(&file).map_err(|e| CopError::Config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| CopError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| CopError::format(path, e))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(CopError::format(
                path,
                format!("unsupported model file {} v{}", file.format, file.version),
            ));
        }
        Ok(file.trained)
    }
}

impl Regressor for TrainedModel {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        self.predict_genes(*x)
    }
}
