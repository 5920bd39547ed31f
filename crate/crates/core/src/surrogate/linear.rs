use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::{FeatureRow, Regressor, N_FEATURES};
use crate::error::{CopError, Result};

const RIDGE: f64 = 1e-8;

/// Ordinary least squares `y = w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: [f64; N_FEATURES],
    pub intercept: f64,
}

impl Regressor for LinearModel {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.intercept
    }
}

/// Least-squares fit through the centred normal equations. A tiny ridge
/// term keeps constant feature columns solvable (their weight comes out 0).
pub fn fit_linear(train: &[FeatureRow]) -> Result<LinearModel> {
    if train.len() < N_FEATURES + 1 {
        return Err(CopError::Fit(format!(
            "linear fit needs at least {} rows, got {}",
            N_FEATURES + 1,
            train.len()
        )));
    }
    if train.iter().any(|r| !r.is_finite()) {
        return Err(CopError::Fit("non-finite training row".into()));
    }
    let n = train.len() as f64;
    let x_mean = train
        .iter()
        .fold(Vector6::zeros(), |acc, r| acc + Vector6::from(r.x))
        / n;
    let y_mean = train.iter().map(|r| r.y).sum::<f64>() / n;

    let mut gram = Matrix6::<f64>::zeros();
    let mut moment = Vector6::<f64>::zeros();
    for r in train {
        let xc = Vector6::from(r.x) - x_mean;
        gram += xc * xc.transpose();
        moment += xc * (r.y - y_mean);
    }
    gram += Matrix6::identity() * RIDGE;

    let chol = gram
        .cholesky()
        .ok_or_else(|| CopError::Fit("normal equations are not positive definite".into()))?;
    let w = chol.solve(&moment);
    let intercept = y_mean - w.dot(&x_mean);
    if !w.iter().all(|v| v.is_finite()) || !intercept.is_finite() {
        return Err(CopError::Fit("linear fit produced non-finite coefficients".into()));
    }
    Ok(LinearModel {
        weights: w.into(),
        intercept,
    })
}
