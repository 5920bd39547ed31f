use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fit_gbrt, fit_knn, fit_linear, rmse, split, ExternalTable, FeatureRow, FitReport, GbrtParams,
    Model, TrainedModel,
};
use crate::datagen::subsample_indices;
use crate::error::{CopError, Result};

/// Share of rows held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear,
    Knn { k: usize },
    Gbrt(GbrtParams),
    /// Predictions imported from a CSV file.
    External { path: PathBuf },
}

impl ModelSpec {
    /// Linear, KNN (k = 5) and GBRT with default settings.
    pub fn standard() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Linear,
            ModelSpec::Knn { k: 5 },
            ModelSpec::Gbrt(GbrtParams::default()),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Linear => "linear".into(),
            ModelSpec::Knn { k } => format!("knn(k={k})"),
            ModelSpec::Gbrt(p) => format!("gbrt(n={},depth={})", p.n_trees, p.max_depth),
            ModelSpec::External { .. } => "external".into(),
        }
    }

    pub fn fit(&self, train: &[FeatureRow], seed: u64) -> Result<Model> {
        Ok(match self {
            ModelSpec::Linear => Model::Linear(fit_linear(train)?),
            ModelSpec::Knn { k } => Model::Knn(fit_knn(train, *k)?),
            ModelSpec::Gbrt(p) => Model::Gbrt(fit_gbrt(train, &GbrtParams { seed, ..*p })?),
            ModelSpec::External { path } => Model::External(ExternalTable::load(path)?),
        })
    }
}

/// Splits `rows` 80/20 with `seed`, fits `spec` on `fraction` of the
/// training side and reports train and held-out RMSE.
pub fn train_model(
    rows: &[FeatureRow],
    spec: &ModelSpec,
    fraction: f64,
    seed: u64,
) -> Result<TrainedModel> {
    let (train, test) = split(rows, TEST_FRACTION, seed)?;
    let picked = subsample_indices(train.len(), fraction, seed.wrapping_add(1))?;
    let train: Vec<FeatureRow> = picked.into_iter().map(|i| train[i]).collect();
    let model = spec.fit(&train, seed.wrapping_add(2))?;
    let report = FitReport {
        model_name: spec.name(),
        rmse_train: rmse(&model, &train)?,
        rmse_test: rmse(&model, &test)?,
        train_fraction: fraction,
        n_train: train.len(),
        n_test: test.len(),
        seed,
    };
    Ok(TrainedModel { model, report })
}

#[derive(Debug)]
pub struct EvaluationCell {
    pub model_name: String,
    pub train_fraction: f64,
    pub outcome: Result<FitReport>,
}

/// Fits every `spec` at every training fraction against one fixed held-out
/// split. A failing cell is reported, not propagated.
pub fn evaluate_models(
    rows: &[FeatureRow],
    specs: &[ModelSpec],
    fractions: &[f64],
    seed: u64,
) -> Vec<EvaluationCell> {
    let cells: Vec<(&ModelSpec, f64)> = specs
        .iter()
        .flat_map(|s| fractions.iter().map(move |&f| (s, f)))
        .collect();
    cells
        .into_par_iter()
        .map(|(spec, fraction)| EvaluationCell {
            model_name: spec.name(),
            train_fraction: fraction,
            outcome: train_model(rows, spec, fraction, seed).map(|t| t.report),
        })
        .collect()
}

/// Ranking table: per training fraction (largest first), models by
/// ascending test RMSE. Failed cells come last with their error.
pub fn write_reports_csv(cells: &[EvaluationCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut order: Vec<&EvaluationCell> = cells.iter().collect();
    let key = |c: &EvaluationCell| c.outcome.as_ref().map_or(f64::INFINITY, |r| r.rmse_test);
    order.sort_by(|a, b| {
        b.train_fraction
            .total_cmp(&a.train_fraction)
            .then(key(a).total_cmp(&key(b)))
    });

    let mut out = String::from(
        "rank,model_name,train_fraction,n_train,n_test,rmse_train,rmse_test,seed,status\n",
    );
    let mut rank = 0;
    let mut current = f64::NAN;
    for c in order {
        if c.train_fraction != current {
            current = c.train_fraction;
            rank = 0;
        }
        rank += 1;
        match &c.outcome {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{rank},{},{},{},{},{:.6},{:.6},{},ok",
                    r.model_name, r.train_fraction, r.n_train, r.n_test, r.rmse_train, r.rmse_test, r.seed
                );
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(
                    out,
                    "{rank},{},{},,,NaN,NaN,,error: {msg}",
                    c.model_name, c.train_fraction
                );
            }
        }
    }
    fs::write(path, out).map_err(|e| CopError::io(path, e))
}
