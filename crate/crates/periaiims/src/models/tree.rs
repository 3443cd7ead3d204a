//! Shared decision-tree representation and the CART (Gini) builder.
//!
//! Every tree-based family (single tree, bagged forest, boosted stumps,
//! gradient-boosted trees) produces the same node layout, including per-node
//! cover counts, which the attribution module requires.

use crate::ingest::EncodedMatrix;
use crate::models::presort::{partition_lists, SortedColumns};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One tree node. Internal nodes route on `row[feature] < threshold`;
/// leaves carry `value`. `cover` counts the training rows that reached the
/// node, and always satisfies parent cover = left cover + right cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
    pub cover: f64,
    pub is_leaf: bool,
}

impl TreeNode {
    fn leaf(value: f64, cover: f64) -> Self {
        TreeNode {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            cover,
            is_leaf: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while !node.is_leaf {
            node = if row[node.feature] < node.threshold {
                &self.nodes[node.left]
            } else {
                &self.nodes[node.right]
            };
        }
        node.value
    }

    pub fn max_depth(&self) -> usize {
        fn depth(nodes: &[TreeNode], i: usize) -> usize {
            if nodes[i].is_leaf {
                0
            } else {
                1 + depth(nodes, nodes[i].left).max(depth(nodes, nodes[i].right))
            }
        }
        depth(&self.nodes, 0)
    }

    /// Expected leaf value under the cover-weighted (training) distribution.
    pub fn expected_value(&self) -> f64 {
        fn walk(nodes: &[TreeNode], i: usize) -> f64 {
            let n = &nodes[i];
            if n.is_leaf {
                return n.value;
            }
            let (l, r) = (&nodes[n.left], &nodes[n.right]);
            (l.cover * walk(nodes, n.left) + r.cover * walk(nodes, n.right)) / n.cover
        }
        walk(&self.nodes, 0)
    }

    /// Verifies parent cover = left cover + right cover for every node.
    pub fn covers_consistent(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.is_leaf
                || (self.nodes[n.left].cover + self.nodes[n.right].cover - n.cover).abs() < 1e-9
        })
    }

    /// Indices of features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| !n.is_leaf)
            .map(|n| n.feature)
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// What a CART leaf stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    /// Weighted positive-class fraction.
    Probability,
    /// Weighted majority class as 0.0 or 1.0 (ties to 0).
    MajorityVote,
}

pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn uniformly per split; `None` = all features.
    pub features_per_split: Option<usize>,
    pub leaf_kind: LeafKind,
}

struct CartBuilder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [u8],
    weights: &'a [f64],
    params: &'a CartParams,
    nodes: Vec<TreeNode>,
}

/// Weighted Gini impurity of a (w0, w1) class-mass pair.
fn gini(w0: f64, w1: f64) -> f64 {
    let total = w0 + w1;
    if total <= 0.0 {
        return 0.0;
    }
    let p = w1 / total;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> CartBuilder<'a> {
    fn class_masses(&self, node_rows: &[u32]) -> (f64, f64) {
        let mut w0 = 0.0;
        let mut w1 = 0.0;
        for &r in node_rows {
            let r = r as usize;
            if self.y[r] == 1 {
                w1 += self.weights[r];
            } else {
                w0 += self.weights[r];
            }
        }
        (w0, w1)
    }

    fn leaf_value(&self, node_rows: &[u32]) -> f64 {
        let (w0, w1) = self.class_masses(node_rows);
        let total = w0 + w1;
        let p = if total > 0.0 { w1 / total } else { 0.0 };
        match self.params.leaf_kind {
            LeafKind::Probability => p,
            LeafKind::MajorityVote => f64::from(p > 0.5),
        }
    }

    fn candidate_features(&self, rng: &mut Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let p = self.cols.len();
        match (self.params.features_per_split, rng) {
            (Some(m), Some(rng)) if m < p => {
                let mut all: Vec<usize> = (0..p).collect();
                all.shuffle(rng);
                let mut chosen = all[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    /// Scans the presorted per-feature lists; candidate thresholds are
    /// midpoints between adjacent distinct values.
    fn best_split(&self, lists: &[Vec<u32>], features: &[usize]) -> Option<BestSplit> {
        let (total0, total1) = self.class_masses(&lists[0]);
        let total = total0 + total1;
        let parent_impurity = gini(total0, total1);
        if parent_impurity == 0.0 {
            return None;
        }
        let n = lists[0].len();

        let mut best: Option<BestSplit> = None;
        for &f in features {
            let list = &lists[f];
            let col = &self.cols[f];
            let mut left0 = 0.0;
            let mut left1 = 0.0;
            for (i, pair) in list.windows(2).enumerate() {
                let r = pair[0] as usize;
                if self.y[r] == 1 {
                    left1 += self.weights[r];
                } else {
                    left0 += self.weights[r];
                }
                let v = col[r];
                let next_v = col[pair[1] as usize];
                if next_v == v {
                    continue; // not a boundary between distinct values
                }
                let left_count = i + 1;
                let right_count = n - left_count;
                if left_count < self.params.min_samples_leaf
                    || right_count < self.params.min_samples_leaf
                {
                    continue;
                }
                let wl = left0 + left1;
                let wr = total - wl;
                let child =
                    (wl * gini(left0, left1) + wr * gini(total0 - left0, total1 - left1)) / total;
                let gain = parent_impurity - child;
                // Strict improvement keeps the lowest feature index, then
                // the lowest threshold, on exact gain ties.
                if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: 0.5 * (v + next_v),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(
        &mut self,
        lists: Vec<Vec<u32>>,
        depth: usize,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> usize {
        let n = lists[0].len();
        let cover = n as f64;
        let value = self.leaf_value(&lists[0]);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            self.nodes.push(TreeNode::leaf(value, cover));
            return self.nodes.len() - 1;
        }
        let features = self.candidate_features(rng);
        let Some(split) = self.best_split(&lists, &features) else {
            self.nodes.push(TreeNode::leaf(value, cover));
            return self.nodes.len() - 1;
        };

        let split_col = &self.cols[split.feature];
        let (left_lists, right_lists) =
            partition_lists(&lists, |r| split_col[r as usize] < split.threshold);
        drop(lists);

        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
            value,
            cover,
            is_leaf: false,
        });
        let left = self.grow(left_lists, depth + 1, rng);
        let right = self.grow(right_lists, depth + 1, rng);
        self.nodes[idx].left = left;
        self.nodes[idx].right = right;
        idx
    }
}

/// Grows a CART classifier over the given row multiset. `weights` default
/// to 1; `rng` is only consulted when `features_per_split` subsamples.
pub fn build_cart(
    x: &EncodedMatrix,
    rows: &[usize],
    y: &[u8],
    weights: Option<&[f64]>,
    params: &CartParams,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let sorted = SortedColumns::build(x);
    build_cart_presorted(x, &sorted, rows, y, weights, params, rng)
}

/// Same as [`build_cart`] with the presort provided by the caller (shared
/// across the trees of an ensemble).
pub fn build_cart_presorted(
    x: &EncodedMatrix,
    sorted: &SortedColumns,
    rows: &[usize],
    y: &[u8],
    weights: Option<&[f64]>,
    params: &CartParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let ones;
    let weights = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; x.n_rows()];
            &ones
        }
    };
    let mut counts = vec![0u32; x.n_rows()];
    for &r in rows {
        counts[r] += 1;
    }
    let mut builder = CartBuilder {
        cols: &sorted.values,
        y,
        weights,
        params,
        nodes: Vec::new(),
    };
    builder.grow(sorted.node_lists(&counts), 0, &mut rng);
    DecisionTree {
        nodes: builder.nodes,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::ingest::{ColumnSource, EncodedColumn, EncodedMatrix, EncodingRole};

    pub(crate) fn matrix_from(rows: &[&[f64]]) -> EncodedMatrix {
        let p = rows[0].len();
        let columns: Vec<EncodedColumn> = (0..p)
            .map(|j| EncodedColumn {
                source: ColumnSource::Feature(format!("x{j}")),
                role: EncodingRole::ScaledNumeric { min: 0.0, max: 1.0 },
            })
            .collect();
        let mut m = EncodedMatrix::new(rows.len(), columns);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }
}
