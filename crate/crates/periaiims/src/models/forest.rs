//! Bagged CART forest with per-split feature subsampling.
//!
//! Tree construction is parallel over trees with fixed per-tree seeds, so
//! the result is identical whatever the worker-thread count.

use crate::ingest::EncodedMatrix;
use crate::models::presort::SortedColumns;
use crate::models::tree::{build_cart_presorted, CartParams, DecisionTree, LeafKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// `None` = ceil(sqrt(p)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

pub fn fit_forest(
    x: &EncodedMatrix,
    y: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Vec<DecisionTree> {
    let n = x.n_rows();
    let p = x.n_cols();
    let features = params
        .features_per_split
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    // A full-feature, no-bootstrap, single-tree forest degenerates to the
    // plain CART and must not consult the rng at all.
    let subsample = if features < p { Some(features) } else { None };
    let sorted = SortedColumns::build(x);

    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let cart = CartParams {
                max_depth: params.max_depth,
                min_samples_leaf: 1,
                features_per_split: subsample,
                leaf_kind: LeafKind::Probability,
            };
            let rng_opt = if subsample.is_some() {
                Some(&mut rng)
            } else {
                None
            };
            build_cart_presorted(x, &sorted, &rows, y, None, &cart, rng_opt)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::testutil::matrix_from;

    #[test]
    fn single_unbagged_full_feature_tree_equals_cart() {
        let x = matrix_from(&[
            &[0.1, 0.9],
            &[0.3, 0.2],
            &[0.7, 0.6],
            &[0.9, 0.1],
            &[0.5, 0.8],
        ]);
        let y = [0, 0, 1, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            max_depth: 64,
            features_per_split: Some(2),
            bootstrap: false,
        };
        let forest = fit_forest(&x, &y, &params, 7);
        let cart = crate::models::tree::build_cart(
            &x,
            &[0, 1, 2, 3, 4],
            &y,
            None,
            &CartParams {
                max_depth: 64,
                min_samples_leaf: 1,
                features_per_split: None,
                leaf_kind: LeafKind::Probability,
            },
            None,
        );
        assert_eq!(forest[0], cart);
    }

    #[test]
    fn unbounded_tree_memorizes_unique_rows() {
        let x = matrix_from(&[&[0.1], &[0.3], &[0.5], &[0.7], &[0.9]]);
        let y = [0, 1, 0, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            max_depth: usize::MAX,
            features_per_split: Some(1),
            bootstrap: false,
        };
        let forest = fit_forest(&x, &y, &params, 0);
        for i in 0..x.n_rows() {
            assert_eq!(forest[0].predict_row(x.row(i)), f64::from(y[i]));
        }
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let x = matrix_from(&[
            &[0.1, 0.9],
            &[0.3, 0.2],
            &[0.7, 0.6],
            &[0.9, 0.1],
            &[0.5, 0.8],
            &[0.2, 0.4],
        ]);
        let y = [0, 0, 1, 1, 1, 0];
        let params = ForestParams {
            n_trees: 8,
            max_depth: 4,
            features_per_split: Some(1),
            bootstrap: true,
        };
        let a = fit_forest(&x, &y, &params, 5);
        let b = fit_forest(&x, &y, &params, 5);
        assert_eq!(a, b);
        let c = fit_forest(&x, &y, &params, 6);
        assert_ne!(a, c);
    }
}
