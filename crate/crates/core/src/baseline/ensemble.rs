use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RegressionTree, SortedColumns, TreeParams};
use super::{BaselineConfig, DriftPolicy};
use crate::encoding::EncodedMatrix;

/// Probability clamp applied when a single-class pool sets the base score.
const PRIOR_CLAMP: f64 = 1e-3;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of one row at raw score `f`.
pub fn logistic_loss(y: u8, f: f64) -> f64 {
    // softplus(f) - y f, computed without overflow
    let softplus = f.max(0.0) + (-f.abs()).exp().ln_1p();
    softplus - f64::from(y) * f
}

/// Negative derivative of [`logistic_loss`] with respect to the raw score.
pub fn negative_gradient(y: u8, f: f64) -> f64 {
    f64::from(y) - sigmoid(f)
}

pub fn mean_loss(y: &[u8], raw: &[f64]) -> f64 {
    y.iter().zip(raw).map(|(&y, &f)| logistic_loss(y, f)).sum::<f64>() / y.len().max(1) as f64
}

fn log_odds(p: f64) -> f64 {
    let p = p.clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
    (p / (1.0 - p)).ln()
}

/// `sigmoid(base + sum_t rate_t * tree_t(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    base_score: f64,
    trees: Vec<RegressionTree>,
    rates: Vec<f64>,
    n_features: usize,
}

impl BoostedEnsemble {
    pub fn new(base_score: f64, n_features: usize) -> Self {
        Self {
            base_score,
            trees: Vec::new(),
            rates: Vec::new(),
            n_features,
        }
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn push_tree(&mut self, tree: RegressionTree, rate: f64) {
        self.trees.push(tree);
        self.rates.push(rate);
    }

    /// Raw score using only the first `n_trees` trees.
    pub fn raw_prefix(&self, row: &[f64], n_trees: usize) -> f64 {
        self.trees
            .iter()
            .zip(&self.rates)
            .take(n_trees)
            .fold(self.base_score, |acc, (t, r)| acc + r * t.predict(row))
    }

    pub fn raw(&self, row: &[f64]) -> f64 {
        self.raw_prefix(row, self.trees.len())
    }

    pub fn predict_raw(&self, x: &EncodedMatrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.raw(x.row(i))).collect()
    }

    /// Scores in (0, 1).
    pub fn predict_scores(&self, x: &EncodedMatrix) -> Vec<f64> {
        assert_eq!(x.cols(), self.n_features, "row width differs from training width");
        (0..x.rows()).map(|i| sigmoid(self.raw(x.row(i)))).collect()
    }

    /// Add `n_trees` trees fitted to the logistic-loss residuals of the
    /// current model on `(x, y)`. Returns the mean training loss before the
    /// first tree and after each tree.
    pub fn boost(&mut self, x: &EncodedMatrix, y: &[u8], n_trees: usize, rate: f64, params: TreeParams) -> Vec<f64> {
        assert_eq!(x.rows(), y.len());
        let mut raw = self.predict_raw(x);
        let mut losses = Vec::with_capacity(n_trees + 1);
        losses.push(mean_loss(y, &raw));
        if n_trees == 0 || x.rows() == 0 {
            return losses;
        }
        let sorted = SortedColumns::new(x);
        let mut residuals = vec![0.0; y.len()];
        for _ in 0..n_trees {
            for ((r, &yi), &f) in residuals.iter_mut().zip(y).zip(&raw) {
                *r = negative_gradient(yi, f);
            }
            let tree = fit_tree(x, &sorted, &residuals, params);
            for (i, f) in raw.iter_mut().enumerate() {
                *f += rate * tree.predict(x.row(i));
            }
            losses.push(mean_loss(y, &raw));
            self.push_tree(tree, rate);
        }
        losses
    }
}

/// Training loss before the first tree and after each tree of one fit call.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub losses: Vec<f64>,
    /// The pool held a single class; no trees were fitted.
    pub degenerate: bool,
}

fn is_degenerate(y: &[u8]) -> bool {
    y.iter().all(|&v| v == 1) || y.iter().all(|&v| v == 0)
}

fn prior(y: &[u8]) -> f64 {
    if y.is_empty() {
        0.5
    } else {
        y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64
    }
}

/// Initial fit on the first labeled block: `initial_trees` trees on at most
/// `subsample_cap` uniformly subsampled rows.
pub fn fit_initial(x: &EncodedMatrix, y: &[u8], config: &BaselineConfig, seed: u64) -> (BoostedEnsemble, FitTrace) {
    let (x, y) = if x.rows() > config.subsample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, x.rows(), config.subsample_cap).into_vec();
        idx.sort_unstable();
        let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        (x.select_rows(&idx), ys)
    } else {
        (x.clone(), y.to_vec())
    };
    let mut ensemble = BoostedEnsemble::new(log_odds(prior(&y)), x.cols());
    if is_degenerate(&y) {
        let losses = vec![mean_loss(&y, &ensemble.predict_raw(&x))];
        return (ensemble, FitTrace { losses, degenerate: true });
    }
    let losses = ensemble.boost(&x, &y, config.initial_trees, config.learning_rate, config.tree_params());
    (ensemble, FitTrace { losses, degenerate: false })
}

/// Learning rate for trees added after `revealed` blocks have been seen.
pub fn rate_for(config: &BaselineConfig, revealed: usize) -> f64 {
    match config.policy {
        DriftPolicy::AdaptiveLr => config.learning_rate * config.lr_decay.powi(revealed as i32),
        _ => config.learning_rate,
    }
}

impl BoostedEnsemble {
    /// Append `trees_per_block` trees fitted on the selected training pool.
    /// Earlier trees are left untouched. A single-class pool only moves the
    /// base score to the pool prior.
    pub fn extend(&mut self, x_pool: &EncodedMatrix, y_pool: &[u8], config: &BaselineConfig, revealed: usize) -> FitTrace {
        if is_degenerate(y_pool) {
            self.base_score = log_odds(prior(y_pool));
            let losses = vec![mean_loss(y_pool, &self.predict_raw(x_pool))];
            return FitTrace { losses, degenerate: true };
        }
        let rate = rate_for(config, revealed);
        let losses = self.boost(x_pool, y_pool, config.trees_per_block, rate, config.tree_params());
        FitTrace { losses, degenerate: false }
    }
}
