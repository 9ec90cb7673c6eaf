//! Axis-aligned regression trees grown level by level with exact greedy
//! variance-reduction splits at midpoints between distinct feature values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::EncodedMatrix;

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        assert!(!nodes.is_empty(), "a tree needs a root");
        Self { nodes }
    }

    pub fn leaf(value: f64) -> Self {
        Self::from_nodes(vec![Node::Leaf { value }])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Row indices of a training matrix sorted by each feature's value.
pub struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &EncodedMatrix) -> Self {
        let order = (0..x.cols())
            .into_par_iter()
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenNode {
    node: usize,
    sum: f64,
    count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Fit one tree to `targets` by squared error. Leaves hold the mean target of
/// their rows.
pub fn fit_tree(x: &EncodedMatrix, sorted: &SortedColumns, targets: &[f64], params: TreeParams) -> RegressionTree {
    let n = x.rows();
    assert_eq!(n, targets.len());
    let min_leaf = params.min_samples_leaf.max(1);
    if n == 0 {
        return RegressionTree::leaf(0.0);
    }

    const DONE: usize = usize::MAX;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenNode {
        node: 0,
        sum: targets.iter().sum(),
        count: n,
    }];
    // Index into `open` for each row, or DONE once its node is final.
    let mut slot = vec![0usize; n];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let per_feature: Vec<Vec<Option<Candidate>>> = sorted
            .order
            .par_iter()
            .enumerate()
            .map(|(f, order)| best_splits_for_feature(x, f, order, targets, &slot, &open, min_leaf))
            .collect();

        // Reduce in feature order so ties resolve to the lowest feature index.
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        for cands in &per_feature {
            for (o, c) in cands.iter().enumerate() {
                if let Some(c) = c {
                    if best[o].is_none_or(|b| c.gain > b.gain) {
                        best[o] = Some(*c);
                    }
                }
            }
        }

        let mut next_open = Vec::new();
        // For each open node: the slots of its children in `next_open`.
        let mut children: Vec<Option<(usize, usize, usize, f64)>> = Vec::with_capacity(open.len());
        for (o, node) in open.iter().enumerate() {
            match best[o] {
                Some(c) if c.gain > MIN_GAIN => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node.node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    let l = next_open.len();
                    next_open.push(OpenNode { node: left, sum: 0.0, count: 0 });
                    next_open.push(OpenNode { node: left + 1, sum: 0.0, count: 0 });
                    children.push(Some((l, l + 1, c.feature, c.threshold)));
                }
                _ => {
                    nodes[node.node] = Node::Leaf {
                        value: node.sum / node.count as f64,
                    };
                    children.push(None);
                }
            }
        }
        for (r, s) in slot.iter_mut().enumerate() {
            if *s == DONE {
                continue;
            }
            match children[*s] {
                None => *s = DONE,
                Some((l, rt, feature, threshold)) => {
                    let target = if x.get(r, feature) <= threshold { l } else { rt };
                    next_open[target].sum += targets[r];
                    next_open[target].count += 1;
                    *s = target;
                }
            }
        }
        open = next_open;
    }

    for node in &open {
        nodes[node.node] = Node::Leaf {
            value: node.sum / node.count as f64,
        };
    }
    RegressionTree { nodes }
}

fn best_splits_for_feature(
    x: &EncodedMatrix,
    feature: usize,
    order: &[u32],
    targets: &[f64],
    slot: &[usize],
    open: &[OpenNode],
    min_leaf: usize,
) -> Vec<Option<Candidate>> {
    let mut left_sum = vec![0.0; open.len()];
    let mut left_count = vec![0usize; open.len()];
    let mut last = vec![f64::NAN; open.len()];
    let mut best: Vec<Option<Candidate>> = vec![None; open.len()];

    for &r in order {
        let r = r as usize;
        let o = slot[r];
        if o == usize::MAX {
            continue;
        }
        let v = x.get(r, feature);
        let lc = left_count[o];
        if lc >= min_leaf && open[o].count - lc >= min_leaf && v > last[o] {
            let ls = left_sum[o];
            let rs = open[o].sum - ls;
            let rc = open[o].count - lc;
            let total = open[o].sum;
            let gain = ls * ls / lc as f64 + rs * rs / rc as f64 - total * total / open[o].count as f64;
            if best[o].is_none_or(|b| gain > b.gain) {
                let prev = last[o];
                let mut threshold = prev + (v - prev) / 2.0;
                if threshold >= v {
                    threshold = prev;
                }
                best[o] = Some(Candidate {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
        left_sum[o] += targets[r];
        left_count[o] += 1;
        last[o] = v;
    }
    best
}
