use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ChronoDataset;
use crate::error::{Error, Result};

/// Contiguous, ascending, non-empty chronological blocks covering every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    ranges: Vec<Range<usize>>,
}

impl BlockPlan {
    /// Split `rows` into `n` blocks whose sizes differ by at most one; the
    /// first `rows % n` blocks take the extra row.
    pub fn even(rows: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPlan(format!("need at least 2 blocks, got {n}")));
        }
        if n > rows {
            return Err(Error::InvalidPlan(format!("{n} blocks requested for {rows} rows")));
        }
        let base = rows / n;
        let extra = rows % n;
        let mut start = 0;
        let ranges = (0..n)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(Self { ranges })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn block(&self, k: usize) -> Range<usize> {
        self.ranges[k].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn total_rows(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// Index of the block containing `row`.
    pub fn block_of(&self, row: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&row))
    }
}

pub fn split_blocks(dataset: &ChronoDataset, n: usize) -> Result<BlockPlan> {
    BlockPlan::even(dataset.len(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_division() {
        let plan = BlockPlan::even(100, 10).unwrap();
        assert_eq!(plan.len(), 10);
        for (i, r) in plan.ranges().iter().enumerate() {
            assert_eq!(*r, i * 10..i * 10 + 10);
        }
    }

    #[test]
    fn remainder_goes_to_earliest_blocks() {
        // Oracle: enumerate sizes directly from the rule and rebuild the ranges.
        let rows = 103;
        let n = 10;
        let sizes: Vec<usize> = (0..n).map(|i| if i < rows % n { rows / n + 1 } else { rows / n }).collect();
        assert_eq!(sizes, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
        let mut expected = Vec::new();
        let mut s = 0;
        for len in sizes {
            expected.push(s..s + len);
            s += len;
        }
        assert_eq!(s, rows);
        assert_eq!(BlockPlan::even(rows, n).unwrap().ranges(), expected.as_slice());
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(matches!(BlockPlan::even(5, 6), Err(Error::InvalidPlan(_))));
        assert!(matches!(BlockPlan::even(5, 1), Err(Error::InvalidPlan(_))));
        assert!(BlockPlan::even(5, 5).is_ok());
    }

    proptest! {
        #[test]
        fn plan_partitions_rows(rows in 2usize..2000, n in 2usize..64) {
            prop_assume!(n <= rows);
            let plan = BlockPlan::even(rows, n).unwrap();
            prop_assert_eq!(plan.len(), n);
            let mut cursor = 0;
            let (mut lo, mut hi) = (usize::MAX, 0);
            for r in plan.ranges() {
                prop_assert_eq!(r.start, cursor);
                prop_assert!(r.end > r.start);
                lo = lo.min(r.len());
                hi = hi.max(r.len());
                cursor = r.end;
            }
            prop_assert_eq!(cursor, rows);
            prop_assert!(hi - lo <= 1);
            for row in [0, rows / 2, rows - 1] {
                let b = plan.block_of(row).unwrap();
                prop_assert!(plan.block(b).contains(&row));
            }
        }
    }
}
