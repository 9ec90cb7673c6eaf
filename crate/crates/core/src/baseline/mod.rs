//! Incrementally grown gradient-boosted tree ensemble.
//!
//! The first revealed block fits `initial_trees` trees. Every later block
//! appends `trees_per_block` trees fitted on a training pool chosen by the
//! drift policy; earlier trees are never modified.

mod ensemble;
mod pool;
mod predictor;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingPlan;
use crate::error::{Error, Result};

pub use ensemble::{
    fit_initial, logistic_loss, mean_loss, negative_gradient, rate_for, sigmoid, BoostedEnsemble, FitTrace,
};
pub use pool::{select_training_pool, TrainingPool};
pub use predictor::BaselinePredictor;
pub use tree::{fit_tree, Node, RegressionTree, SortedColumns, TreeParams};

/// Which labeled history later trees are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftPolicy {
    /// Every revealed block, subsampled with a preference for recent rows.
    GrowFullHistory,
    /// Only the last `blocks` revealed blocks.
    SlidingWindow { blocks: usize },
    /// Full history, with the learning rate of new trees decaying per block.
    AdaptiveLr,
}

impl fmt::Display for DriftPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftPolicy::GrowFullHistory => f.write_str("grow-full-history"),
            DriftPolicy::SlidingWindow { blocks } => write!(f, "sliding-window:{blocks}"),
            DriftPolicy::AdaptiveLr => f.write_str("adaptive-lr"),
        }
    }
}

impl FromStr for DriftPolicy {
    type Err = Error;

    /// Parses `grow-full-history`, `adaptive-lr` or `sliding-window:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grow-full-history" => Ok(DriftPolicy::GrowFullHistory),
            "adaptive-lr" => Ok(DriftPolicy::AdaptiveLr),
            _ => {
                let k = s
                    .strip_prefix("sliding-window:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown drift policy `{s}`")))?;
                Ok(DriftPolicy::SlidingWindow { blocks: k })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Trees fitted on the first labeled block (`l`).
    pub initial_trees: usize,
    /// Trees appended per later block (`h`).
    pub trees_per_block: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Maximum rows used by one fit.
    pub subsample_cap: usize,
    pub policy: DriftPolicy,
    /// Per-block learning-rate factor under [`DriftPolicy::AdaptiveLr`].
    pub lr_decay: f64,
    /// Per-block sampling weight factor when subsampling the full history.
    pub recency_decay: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
    pub encoding: EncodingPlan,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            initial_trees: 100,
            trees_per_block: 20,
            max_depth: 4,
            learning_rate: 0.1,
            subsample_cap: 100_000,
            policy: DriftPolicy::GrowFullHistory,
            lr_decay: 0.8,
            recency_decay: 0.8,
            min_samples_leaf: 20,
            seed: 0,
            encoding: EncodingPlan::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.initial_trees == 0 || self.trees_per_block == 0 {
            return fail("initial_trees and trees_per_block must be at least 1");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate must lie in (0, 1]");
        }
        if self.subsample_cap == 0 {
            return fail("subsample_cap must be at least 1");
        }
        if let DriftPolicy::SlidingWindow { blocks: 0 } = self.policy {
            return fail("sliding window must keep at least 1 block");
        }
        for (name, v) in [("lr_decay", self.lr_decay), ("recency_decay", self.recency_decay)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_round_trips_through_text() {
        for p in [
            DriftPolicy::GrowFullHistory,
            DriftPolicy::SlidingWindow { blocks: 2 },
            DriftPolicy::AdaptiveLr,
        ] {
            assert_eq!(p.to_string().parse::<DriftPolicy>().unwrap(), p);
        }
        assert!("sliding-window:x".parse::<DriftPolicy>().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        BaselineConfig::default().validate().unwrap();
        let bad = BaselineConfig {
            learning_rate: 0.0,
            ..BaselineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BaselineConfig {
            policy: DriftPolicy::SlidingWindow { blocks: 0 },
            ..BaselineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
