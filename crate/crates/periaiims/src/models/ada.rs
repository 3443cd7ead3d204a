//! Discrete adaptive boosting over shallow CART stumps.
//!
//! Sample weights enter the stump builder through the weighted impurity;
//! there is no resampling. Rounds whose weighted training error reaches 0.5
//! are skipped and counted. The ensemble probability is the stage-weighted
//! vote fraction, a convex combination of 0/1 leaf votes.

use crate::ingest::EncodedMatrix;
use crate::models::presort::SortedColumns;
use crate::models::tree::{build_cart_presorted, CartParams, DecisionTree, LeafKind};

pub struct AdaParams {
    pub n_rounds: usize,
    pub stump_depth: usize,
}

pub struct AdaEnsemble {
    pub stumps: Vec<DecisionTree>,
    /// Raw stage weights (log odds of each stump's accuracy).
    pub alphas: Vec<f64>,
    pub skipped_rounds: usize,
    /// Fallback probability when no stump was accepted.
    pub prior: f64,
}

pub fn fit_ada_boost(x: &EncodedMatrix, y: &[u8], params: &AdaParams) -> AdaEnsemble {
    let n = x.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let sorted = SortedColumns::build(x);
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    let mut skipped = 0usize;

    let cart = CartParams {
        max_depth: params.stump_depth,
        min_samples_leaf: 1,
        features_per_split: None,
        leaf_kind: LeafKind::MajorityVote,
    };

    for _ in 0..params.n_rounds {
        let stump = build_cart_presorted(x, &sorted, &rows, y, Some(&weights), &cart, None);
        let votes: Vec<f64> = (0..n).map(|i| stump.predict_row(x.row(i))).collect();
        let err: f64 = votes
            .iter()
            .zip(y)
            .zip(&weights)
            .filter(|((v, &yy), _)| **v != f64::from(yy))
            .map(|(_, &w)| w)
            .sum();

        if err >= 0.5 {
            // The weighted problem is unlearnable for this stump shape;
            // weights would not change, so further rounds are identical.
            skipped += 1;
            break;
        }
        let bounded = err.clamp(1e-12, 1.0 - 1e-12);
        let alpha = ((1.0 - bounded) / bounded).ln();
        stumps.push(stump);
        alphas.push(alpha);
        if err <= 1e-12 {
            break; // perfect stump dominates every later vote
        }

        let mut total = 0.0;
        for i in 0..n {
            if votes[i] != f64::from(y[i]) {
                weights[i] *= alpha.exp();
            }
            total += weights[i];
        }
        for w in &mut weights {
            *w /= total;
        }
    }

    let prior = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
    AdaEnsemble {
        stumps,
        alphas,
        skipped_rounds: skipped,
        prior,
    }
}

impl AdaEnsemble {
    /// Normalized stage weights summing to 1 (empty when no stump held).
    pub fn vote_weights(&self) -> Vec<f64> {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return vec![];
        }
        self.alphas.iter().map(|a| a / total).collect()
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let w = self.vote_weights();
        if w.is_empty() {
            return self.prior;
        }
        self.stumps
            .iter()
            .zip(&w)
            .map(|(s, &wi)| wi * s.predict_row(row))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::testutil::matrix_from;

    #[test]
    fn accepted_stumps_have_error_below_half() {
        let x = matrix_from(&[
            &[0.1, 0.4],
            &[0.2, 0.8],
            &[0.6, 0.3],
            &[0.8, 0.9],
            &[0.9, 0.2],
            &[0.3, 0.7],
        ]);
        let y = [0, 0, 1, 1, 1, 0];
        let ensemble = fit_ada_boost(
            &x,
            &y,
            &AdaParams {
                n_rounds: 10,
                stump_depth: 1,
            },
        );
        assert!(!ensemble.stumps.is_empty());
        // alpha = ln((1-e)/e) > 0 iff e < 0.5.
        assert!(ensemble.alphas.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn separable_data_boosts_to_confident_votes() {
        let x = matrix_from(&[&[0.0], &[0.1], &[0.9], &[1.0]]);
        let y = [0, 0, 1, 1];
        let ensemble = fit_ada_boost(
            &x,
            &y,
            &AdaParams {
                n_rounds: 5,
                stump_depth: 1,
            },
        );
        assert!(ensemble.predict_proba_row(&[0.05]) < 0.5);
        assert!(ensemble.predict_proba_row(&[0.95]) > 0.5);
    }

    #[test]
    fn probabilities_are_convex_vote_combinations() {
        let x = matrix_from(&[
            &[0.1, 0.2],
            &[0.4, 0.9],
            &[0.6, 0.4],
            &[0.9, 0.8],
            &[0.2, 0.6],
            &[0.7, 0.1],
        ]);
        let y = [0, 1, 0, 1, 1, 0];
        let ensemble = fit_ada_boost(
            &x,
            &y,
            &AdaParams {
                n_rounds: 8,
                stump_depth: 2,
            },
        );
        for i in 0..x.n_rows() {
            let p = ensemble.predict_proba_row(x.row(i));
            assert!((0.0..=1.0).contains(&p));
        }
        let w = ensemble.vote_weights();
        if !w.is_empty() {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
