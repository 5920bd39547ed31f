use serde::{Deserialize, Serialize};

use super::{FeatureRow, Regressor, N_FEATURES};
use crate::error::{CopError, Result};

/// Brute-force k-nearest-neighbour regressor: uniform average of the `k`
/// closest training targets under euclidean distance. Distance ties go to
/// the lower training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub training_rows: Vec<FeatureRow>,
}

pub fn fit_knn(train: &[FeatureRow], k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(CopError::Fit("k must be at least 1".into()));
    }
    if k > train.len() {
        return Err(CopError::Fit(format!(
            "k = {k} exceeds {} training rows",
            train.len()
        )));
    }
    if train.iter().any(|r| !r.is_finite()) {
        return Err(CopError::Fit("non-finite training row".into()));
    }
    Ok(KnnModel {
        k,
        training_rows: train.to_vec(),
    })
}

impl KnnModel {
    /// Indices of the `k` nearest training rows, ascending.
    pub fn neighbors(&self, x: &[f64; N_FEATURES]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .training_rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        let mut idx: Vec<usize> = dist.into_iter().map(|(_, i)| i).collect();
        idx.sort_unstable();
        idx
    }
}

impl Regressor for KnnModel {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        let idx = self.neighbors(x);
        idx.iter().map(|&i| self.training_rows[i].y).sum::<f64>() / idx.len() as f64
    }
}
