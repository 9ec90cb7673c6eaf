//! Block-wise AUC and per-dataset aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AUC of one predicted block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub block: usize,
    pub auc: f64,
    pub elapsed_secs: f64,
    /// The block held a single class and was scored 0.5.
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub dataset: String,
    pub blocks: Vec<BlockScore>,
    pub mean_auc: f64,
    pub total_elapsed_secs: f64,
    pub disqualified: bool,
}

impl DatasetScore {
    /// Zero the score and flag the dataset, as for a budget overrun or crash.
    pub fn disqualify(&mut self) {
        self.mean_auc = 0.0;
        self.disqualified = true;
    }
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, ties
/// counted as one half. Runs in O(n log n).
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidInput(format!("score {i} is NaN")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(format!(
            "{positives} positives and {negatives} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid_rank * pos_in_group as f64;
        i = j + 1;
    }

    let p = positives as f64;
    let n = negatives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

/// AUC of a predicted block; a single-class block scores 0.5 and is flagged.
pub fn block_auc(labels: &[u8], scores: &[f64]) -> Result<(f64, bool)> {
    match auc(labels, scores) {
        Ok(a) => Ok((a, false)),
        Err(Error::UndefinedAuc(_)) => Ok((0.5, true)),
        Err(e) => Err(e),
    }
}

/// Mean block AUC; overrunning the budget zeroes the score and disqualifies.
pub fn aggregate_dataset(dataset: impl Into<String>, blocks: Vec<BlockScore>, budget_secs: f64) -> DatasetScore {
    let total_elapsed_secs: f64 = blocks.iter().map(|b| b.elapsed_secs).sum();
    let mean_auc = if blocks.is_empty() {
        0.0
    } else {
        blocks.iter().map(|b| b.auc).sum::<f64>() / blocks.len() as f64
    };
    let mut score = DatasetScore {
        dataset: dataset.into(),
        blocks,
        mean_auc,
        total_elapsed_secs,
        disqualified: false,
    };
    if total_elapsed_secs > budget_secs {
        score.disqualify();
    }
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(P·N) pairwise count.
    fn brute_force_auc(labels: &[u8], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in labels.iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    fn block(auc: f64, elapsed_secs: f64) -> BlockScore {
        BlockScore {
            block: 1,
            auc,
            elapsed_secs,
            degenerate: false,
        }
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(auc(&[0, 1], &[0.2, 0.9]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc(&[0, 1, 1, 0, 1], &[0.3; 5]).unwrap(), 0.5);
    }

    #[test]
    fn small_mixed_case() {
        let labels = [0, 1, 1, 0];
        let scores = [0.1, 0.4, 0.8, 0.5];
        let oracle = brute_force_auc(&labels, &scores);
        assert_eq!(oracle, 0.75);
        assert_eq!(auc(&labels, &scores).unwrap(), oracle);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(Error::UndefinedAuc(_))));
        assert_eq!(block_auc(&[0, 0, 0], &[0.1, 0.2, 0.3]).unwrap(), (0.5, true));
    }

    #[test]
    fn length_mismatch_and_nan_rejected() {
        assert!(matches!(auc(&[0, 1], &[0.1]), Err(Error::InvalidInput(_))));
        assert!(matches!(auc(&[0, 1], &[0.1, f64::NAN]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn aggregate_mean_within_budget() {
        let s = aggregate_dataset("B", vec![block(0.6, 1.0), block(0.8, 2.0)], 600.0);
        assert!((s.mean_auc - 0.7).abs() < 1e-15);
        assert!(!s.disqualified);
        assert_eq!(s.total_elapsed_secs, 3.0);
        let single = aggregate_dataset("B", vec![block(0.55, 0.0)], 600.0);
        assert_eq!(single.mean_auc, 0.55);
    }

    #[test]
    fn aggregate_over_budget_disqualifies() {
        let s = aggregate_dataset("B", vec![block(0.9, 300.0), block(0.9, 301.0)], 600.0);
        assert_eq!(s.mean_auc, 0.0);
        assert!(s.disqualified);
    }

    fn instance() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..2, n),
                prop::collection::vec((0u32..20).prop_map(|k| f64::from(k) / 4.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force((labels, scores) in instance()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let fast = auc(&labels, &scores).unwrap();
            prop_assert!((fast - brute_force_auc(&labels, &scores)).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transform((labels, scores) in instance()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(auc(&labels, &scores).unwrap(), auc(&labels, &transformed).unwrap());
        }

        #[test]
        fn negation_complements(labels in prop::collection::vec(0u8..2, 2..150)) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let scores: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = auc(&labels, &scores).unwrap() + auc(&labels, &neg).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
