//! Second-order (Newton) gradient boosting on the logistic loss.
//!
//! Per-leaf weight w = -sum(g) / (sum(h) + lambda); split gain
//! 0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l)] - gamma.
//! Splits with non-positive gain or a child hessian mass below the floor
//! are rejected. Trees route on midpoint thresholds with the same tie
//! policy as the CART builder.

use crate::ingest::EncodedMatrix;
use crate::models::logistic::sigmoid;
use crate::models::presort::{partition_lists, SortedColumns};
use crate::models::tree::{DecisionTree, TreeNode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradBoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2_lambda: f64,
    pub gamma_min_gain: f64,
    pub min_child_hessian: f64,
}

struct BoostBuilder<'a> {
    cols: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GradBoostParams,
    nodes: Vec<TreeNode>,
}

struct BoostSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> BoostBuilder<'a> {
    fn sums(&self, node_rows: &[u32]) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &r in node_rows {
            g += self.grad[r as usize];
            h += self.hess[r as usize];
        }
        (g, h)
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.l2_lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.l2_lambda)
    }

    fn best_split(&self, lists: &[Vec<u32>], g_total: f64, h_total: f64) -> Option<BoostSplit> {
        let mut best: Option<BoostSplit> = None;
        for (f, list) in lists.iter().enumerate() {
            let col = &self.cols[f];
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for pair in list.windows(2) {
                let r = pair[0] as usize;
                g_left += self.grad[r];
                h_left += self.hess[r];
                let v = col[r];
                let next_v = col[pair[1] as usize];
                if next_v == v {
                    continue;
                }
                let h_right = h_total - h_left;
                if h_left < self.params.min_child_hessian || h_right < self.params.min_child_hessian
                {
                    continue;
                }
                let g_right = g_total - g_left;
                let gain = 0.5
                    * (self.score(g_left, h_left) + self.score(g_right, h_right)
                        - self.score(g_total, h_total))
                    - self.params.gamma_min_gain;
                if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BoostSplit {
                        feature: f,
                        threshold: 0.5 * (v + next_v),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let (g, h) = self.sums(&lists[0]);
        let n = lists[0].len();
        let cover = n as f64;
        let value = self.leaf_weight(g, h);
        if depth >= self.params.max_depth || n < 2 {
            self.nodes.push(leaf(value, cover));
            return self.nodes.len() - 1;
        }
        let Some(split) = self.best_split(&lists, g, h) else {
            self.nodes.push(leaf(value, cover));
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
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        self.nodes[idx].left = left;
        self.nodes[idx].right = right;
        idx
    }
}

fn leaf(value: f64, cover: f64) -> TreeNode {
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

/// Boosted ensemble: margins are `base_score + lr * sum(tree values)`.
pub struct BoostedTrees {
    pub trees: Vec<DecisionTree>,
    pub base_score: f64,
    /// Training logistic loss after each round (non-increasing).
    pub train_loss: Vec<f64>,
}

pub fn fit_grad_boost(x: &EncodedMatrix, y: &[u8], params: &GradBoostParams) -> BoostedTrees {
    let n = x.n_rows();
    let base_score = 0.0; // logit of 0.5
    let mut margin = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = Vec::with_capacity(params.n_rounds);
    let sorted = SortedColumns::build(x);
    let counts = vec![1u32; n];

    for _ in 0..params.n_rounds {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let mut builder = BoostBuilder {
            cols: &sorted.values,
            grad: &grad,
            hess: &hess,
            params,
            nodes: Vec::new(),
        };
        builder.grow(sorted.node_lists(&counts), 0);
        let tree = DecisionTree {
            nodes: builder.nodes,
        };
        for i in 0..n {
            margin[i] += params.learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);

        let loss: f64 = (0..n)
            .map(|i| {
                let m = margin[i];
                let lp = if m > 0.0 {
                    m + (-m).exp().ln_1p()
                } else {
                    m.exp().ln_1p()
                };
                lp - f64::from(y[i]) * m
            })
            .sum::<f64>()
            / n as f64;
        train_loss.push(loss);
    }

    BoostedTrees {
        trees,
        base_score,
        train_loss,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::testutil::matrix_from;

    fn hand_case_params() -> GradBoostParams {
        GradBoostParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_depth: 1,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_hessian: 0.0,
        }
    }

    #[test]
    fn one_round_hand_case_leaf_weight() {
        // y = [1,1,0,0], x1 = [0,0,1,1], base p = 0.5:
        // g = [-.5,-.5,.5,.5], h = .25 each.
        // Left leaf w = -(-1)/(0.5+1) = 2/3.
        let x = matrix_from(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let y = [1, 1, 0, 0];
        let boosted = fit_grad_boost(&x, &y, &hand_case_params());
        assert_eq!(boosted.trees.len(), 1);
        let tree = &boosted.trees[0];
        let root = &tree.nodes[0];
        assert!(!root.is_leaf);
        assert_eq!(root.threshold, 0.5);
        let left = &tree.nodes[root.left];
        assert!(
            (left.value - 2.0 / 3.0).abs() < 1e-12,
            "left leaf {}",
            left.value
        );
        let right = &tree.nodes[root.right];
        assert!((right.value + 2.0 / 3.0).abs() < 1e-12);

        // Scalar oracle for the positive-class probability at x1 = 0.
        let margin = boosted.base_score + 1.0 * tree.predict_row(&[0.0]);
        let p = sigmoid(margin);
        let oracle = 1.0 / (1.0 + (-(2.0 / 3.0f64)).exp());
        assert!((p - oracle).abs() < 1e-12);
        assert!((oracle - 0.6607).abs() < 1e-4);
    }

    #[test]
    fn training_loss_is_monotone_nonincreasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..5).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = matrix_from(&refs);
        let y: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] + 0.3 * rng.gen::<f64>() > 0.8))
            .collect();
        let params = GradBoostParams {
            n_rounds: 25,
            learning_rate: 0.3,
            max_depth: 3,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_hessian: 1.0,
        };
        let boosted = fit_grad_boost(&x, &y, &params);
        for w in boosted.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rejected_splits_leave_single_leaf() {
        // gamma larger than any attainable gain: tree is one Newton leaf.
        let x = matrix_from(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let y = [1, 1, 0, 0];
        let mut params = hand_case_params();
        params.gamma_min_gain = 10.0;
        let boosted = fit_grad_boost(&x, &y, &params);
        assert_eq!(boosted.trees[0].nodes.len(), 1);
    }

    #[test]
    fn child_hessian_floor_blocks_thin_splits() {
        let x = matrix_from(&[&[0.0], &[1.0], &[1.0], &[1.0], &[1.0], &[1.0]]);
        let y = [1, 0, 0, 0, 0, 0];
        let mut params = hand_case_params();
        params.min_child_hessian = 0.4; // one row carries h = 0.25 < 0.4
        let boosted = fit_grad_boost(&x, &y, &params);
        assert_eq!(boosted.trees[0].nodes.len(), 1);
    }

    #[test]
    fn covers_are_consistent() {
        let x = matrix_from(&[
            &[0.0, 0.3],
            &[0.4, 0.9],
            &[0.8, 0.1],
            &[1.0, 0.7],
            &[0.2, 0.5],
        ]);
        let y = [0, 1, 0, 1, 1];
        let params = GradBoostParams {
            n_rounds: 5,
            learning_rate: 0.5,
            max_depth: 3,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_hessian: 0.0,
        };
        let boosted = fit_grad_boost(&x, &y, &params);
        for tree in &boosted.trees {
            assert!(tree.covers_consistent());
        }
    }
}
