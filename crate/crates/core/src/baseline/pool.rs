use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DriftPolicy;

/// Labeled raw rows retained for refitting, each tagged with the block it
/// was revealed in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingPool {
    rows: Vec<Vec<String>>,
    labels: Vec<u8>,
    blocks: Vec<usize>,
    /// Keep only this many most recent blocks.
    window: Option<usize>,
}

impl TrainingPool {
    pub fn new(policy: DriftPolicy) -> Self {
        let window = match policy {
            DriftPolicy::SlidingWindow { blocks } => Some(blocks),
            DriftPolicy::GrowFullHistory | DriftPolicy::AdaptiveLr => None,
        };
        Self {
            window,
            ..Self::default()
        }
    }

    pub fn push_block(&mut self, block: usize, rows: &[Vec<String>], labels: &[u8]) {
        assert_eq!(rows.len(), labels.len());
        assert!(self.newest_block().is_none_or(|b| b <= block), "blocks arrive in time order");
        self.rows.extend_from_slice(rows);
        self.labels.extend_from_slice(labels);
        self.blocks.extend(std::iter::repeat_n(block, rows.len()));
        if let Some(k) = self.window {
            let oldest_kept = (block + 1).saturating_sub(k);
            let cut = self.blocks.partition_point(|&b| b < oldest_kept);
            if cut > 0 {
                self.rows.drain(..cut);
                self.labels.drain(..cut);
                self.blocks.drain(..cut);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn block_tags(&self) -> &[usize] {
        &self.blocks
    }

    pub fn newest_block(&self) -> Option<usize> {
        self.blocks.last().copied()
    }
}

/// Choose at most `cap` pool rows to fit on, returned in chronological order.
///
/// Under a sliding window only rows of the last `K` blocks are eligible and
/// the draw is uniform. Otherwise every row is eligible with weight
/// `recency_decay^age`, where `age` counts blocks back from the newest, and
/// the draw is weighted sampling without replacement.
pub fn select_training_pool(
    pool: &TrainingPool,
    policy: DriftPolicy,
    cap: usize,
    recency_decay: f64,
    seed: u64,
) -> Vec<usize> {
    let Some(newest) = pool.newest_block() else {
        return Vec::new();
    };
    let tags = pool.block_tags();
    let eligible: Vec<usize> = match policy {
        DriftPolicy::SlidingWindow { blocks } => {
            let oldest = (newest + 1).saturating_sub(blocks);
            (0..tags.len()).filter(|&i| tags[i] >= oldest).collect()
        }
        DriftPolicy::GrowFullHistory | DriftPolicy::AdaptiveLr => (0..tags.len()).collect(),
    };
    if eligible.len() <= cap {
        return eligible;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = match policy {
        DriftPolicy::SlidingWindow { .. } => rand::seq::index::sample(&mut rng, eligible.len(), cap)
            .into_iter()
            .map(|j| eligible[j])
            .collect::<Vec<_>>(),
        DriftPolicy::GrowFullHistory | DriftPolicy::AdaptiveLr => {
            // Efraimidis-Spirakis: keep the `cap` largest ln(u) / w.
            let mut keyed: Vec<(f64, usize)> = eligible
                .iter()
                .map(|&i| {
                    let age = (newest - tags[i]) as i32;
                    let w = recency_decay.powi(age).max(f64::MIN_POSITIVE);
                    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                    (u.ln() / w, i)
                })
                .collect();
            keyed.select_nth_unstable_by(cap - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            keyed.truncate(cap);
            keyed.into_iter().map(|(_, i)| i).collect()
        }
    };
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool_with(blocks: usize, per_block: usize, policy: DriftPolicy) -> TrainingPool {
        let mut pool = TrainingPool::new(policy);
        for b in 0..blocks {
            let rows: Vec<Vec<String>> = (0..per_block).map(|i| vec![format!("{b}-{i}")]).collect();
            pool.push_block(b, &rows, &vec![(b % 2) as u8; per_block]);
        }
        pool
    }

    #[test]
    fn small_history_returned_whole() {
        let pool = pool_with(3, 10, DriftPolicy::GrowFullHistory);
        assert_eq!(select_training_pool(&pool, DriftPolicy::GrowFullHistory, 100, 0.8, 1), (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn sliding_window_keeps_last_blocks() {
        let policy = DriftPolicy::SlidingWindow { blocks: 2 };
        let mut pool = TrainingPool::new(policy);
        for b in 1..=4 {
            pool.push_block(b, &[vec![format!("r{b}")], vec![format!("s{b}")]], &[0, 1]);
        }
        assert!(pool.block_tags().iter().all(|&b| b == 3 || b == 4));
        assert_eq!(pool.len(), 4);
    }

    #[test]
    fn window_of_one_only_newest_eligible() {
        let policy = DriftPolicy::SlidingWindow { blocks: 1 };
        // Build the history without eviction, then select under the window.
        let pool = pool_with(5, 20, DriftPolicy::GrowFullHistory);
        let idx = select_training_pool(&pool, policy, 1000, 0.8, 3);
        assert_eq!(idx.len(), 20);
        assert!(idx.iter().all(|&i| pool.block_tags()[i] == 4));
        let capped = select_training_pool(&pool, policy, 5, 0.8, 3);
        assert_eq!(capped.len(), 5);
        assert!(capped.iter().all(|&i| pool.block_tags()[i] == 4));
    }

    #[test]
    fn recency_weighting_favours_new_blocks() {
        let pool = pool_with(10, 1000, DriftPolicy::GrowFullHistory);
        let (mut newest, mut oldest) = (0usize, 0usize);
        for seed in 0..50 {
            let idx = select_training_pool(&pool, DriftPolicy::GrowFullHistory, 100, 0.8, seed);
            assert_eq!(idx.len(), 100);
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
            newest += idx.iter().filter(|&&i| pool.block_tags()[i] == 9).count();
            oldest += idx.iter().filter(|&&i| pool.block_tags()[i] == 0).count();
        }
        // With decay 0.8 the expected share ratio is 0.8^-9 ~ 7.5.
        assert!(newest > oldest, "newest {newest}, oldest {oldest}");
        assert!(newest as f64 > 3.0 * oldest.max(1) as f64);
    }

    #[test]
    fn selection_is_deterministic() {
        let pool = pool_with(6, 300, DriftPolicy::GrowFullHistory);
        let a = select_training_pool(&pool, DriftPolicy::AdaptiveLr, 250, 0.8, 9);
        let b = select_training_pool(&pool, DriftPolicy::AdaptiveLr, 250, 0.8, 9);
        assert_eq!(a, b);
    }
}
