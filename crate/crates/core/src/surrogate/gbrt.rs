//! Gradient-boosted regression trees on squared loss.
//!
//! Each stage fits an exact-greedy regression tree to the current residuals.
//! Splits maximise the L2-regularised gain
//! `GL²/(nL+λ) + GR²/(nR+λ) - G²/(n+λ)` (G = residual sum, n = row count)
//! and a leaf stores `sum(residual) / (count + λ)`. Prediction is
//! `base + learning_rate * sum(tree outputs)`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureRow, Regressor, N_FEATURES};
use crate::error::{CopError, Result};

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbrtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    /// Fraction of rows each tree is grown on.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbrtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            l2_lambda: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbrtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(CopError::Fit("max_depth must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(CopError::Fit("learning rate must be in (0, 1]".into()));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(CopError::Fit("l2_lambda must be non-negative".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(CopError::Fit("subsample must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_depth: usize,
    pub trees: Vec<RegressionTree>,
}

impl GbrtModel {
    /// Prediction using only the first `n_trees` stages.
    pub fn predict_truncated(&self, x: &[f64; N_FEATURES], n_trees: usize) -> f64 {
        self.base_prediction
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .take(n_trees)
                    .map(|t| t.predict(x))
                    .sum::<f64>()
    }
}

impl Regressor for GbrtModel {
    fn predict_row(&self, x: &[f64; N_FEATURES]) -> f64 {
        self.predict_truncated(x, self.trees.len())
    }
}

pub fn fit_gbrt(train: &[FeatureRow], params: &GbrtParams) -> Result<GbrtModel> {
    params.validate()?;
    if train.len() < 10 {
        return Err(CopError::Fit(format!(
            "gradient boosting needs at least 10 rows, got {}",
            train.len()
        )));
    }
    if train.iter().any(|r| !r.is_finite()) {
        return Err(CopError::Fit("non-finite training row".into()));
    }

    let n = train.len();
    let base = train.iter().map(|r| r.y).sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    let sorted = presort(train);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let per_tree = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        for ((r, p), row) in residual.iter_mut().zip(&pred).zip(train) {
            *r = row.y - p;
        }
        let rows = if per_tree < n {
            let mut keep = vec![false; n];
            for i in index::sample(&mut rng, n, per_tree) {
                keep[i] = true;
            }
            Some(keep)
        } else {
            None
        };
        let tree = TreeBuilder::new(train, &residual, params, &sorted, rows.as_deref()).build();
        for (p, row) in pred.iter_mut().zip(train) {
            *p += params.learning_rate * tree.predict(&row.x);
        }
        trees.push(tree);
    }

    Ok(GbrtModel {
        base_prediction: base,
        learning_rate: params.learning_rate,
        l2_lambda: params.l2_lambda,
        max_depth: params.max_depth,
        trees,
    })
}

/// Row indices sorted by each feature (ties by row index).
fn presort(rows: &[FeatureRow]) -> Vec<Vec<usize>> {
    (0..N_FEATURES)
        .map(|f| {
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            idx.sort_by(|&a, &b| rows[a].x[f].total_cmp(&rows[b].x[f]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    rows: &'a [FeatureRow],
    residual: &'a [f64],
    lambda: f64,
    max_depth: usize,
    /// Per feature, the active row indices sorted by that feature; every
    /// node owns the same `[start, end)` range in all of them.
    order: Vec<Vec<usize>>,
    go_left: Vec<bool>,
    scratch: Vec<usize>,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    fn new(
        rows: &'a [FeatureRow],
        residual: &'a [f64],
        params: &GbrtParams,
        sorted: &[Vec<usize>],
        keep: Option<&[bool]>,
    ) -> Self {
        let order = sorted
            .iter()
            .map(|idx| match keep {
                Some(keep) => idx.iter().copied().filter(|&i| keep[i]).collect(),
                None => idx.clone(),
            })
            .collect();
        Self {
            rows,
            residual,
            lambda: params.l2_lambda,
            max_depth: params.max_depth,
            order,
            go_left: vec![false; rows.len()],
            scratch: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn build(mut self) -> RegressionTree {
        let len = self.order[0].len();
        self.grow(0, len, 0);
        RegressionTree { nodes: self.nodes }
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let (sum, count) = self.order[0][start..end]
            .iter()
            .fold((0.0, 0usize), |(s, c), &i| (s + self.residual[i], c + 1));
        let leaf = TreeNode::Leaf {
            value: sum / (count as f64 + self.lambda),
        };
        self.nodes.push(leaf);

        if depth >= self.max_depth || count < 2 {
            return id;
        }
        let Some(split) = self.best_split(start, end, sum) else {
            return id;
        };
        let mid = self.partition(start, end, &split);
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn score(&self, g: f64, n: usize) -> f64 {
        let denom = n as f64 + self.lambda;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    fn best_split(&self, start: usize, end: usize, total: f64) -> Option<BestSplit> {
        let n = end - start;
        let parent = self.score(total, n);
        let mut best: Option<BestSplit> = None;
        for (feature, order) in self.order.iter().enumerate() {
            let seg = &order[start..end];
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                let i = seg[k];
                left_sum += self.residual[i];
                let lo = self.rows[i].x[feature];
                let hi = self.rows[seg[k + 1]].x[feature];
                if hi <= lo {
                    continue;
                }
                let gain = self.score(left_sum, k + 1) + self.score(total - left_sum, n - k - 1)
                    - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(BestSplit {
                        gain,
                        feature,
                        threshold: if mid < hi { mid } else { lo },
                    });
                }
            }
        }
        best
    }

    /// Stable partition of every feature order; returns the split point.
    fn partition(&mut self, start: usize, end: usize, split: &BestSplit) -> usize {
        for &i in &self.order[0][start..end] {
            self.go_left[i] = self.rows[i].x[split.feature] <= split.threshold;
        }
        let mut mid = start;
        for order in &mut self.order {
            self.scratch.clear();
            let mut w = start;
            for k in start..end {
                let i = order[k];
                if self.go_left[i] {
                    order[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            order[w..end].copy_from_slice(&self.scratch);
            mid = w;
        }
        mid
    }
}
