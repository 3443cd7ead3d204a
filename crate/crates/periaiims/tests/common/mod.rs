#![allow(dead_code)] // each test binary uses its own subset of the oracles

//! Independent oracles used by the integration suites. Everything here is
//! deliberately brute-force and shares no code with the implementation
//! paths it checks.

use periaiims::ingest::{ColumnSource, EncodedColumn, EncodedMatrix, EncodingRole};
use periaiims::models::{DecisionTree, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense matrix from literal rows with synthetic provenance.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> EncodedMatrix {
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

/// Brute-force pairwise AUROC: wins plus half-ties over all
/// positive-negative pairs.
pub fn brute_force_auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, (&si, &yi)) in scores.iter().zip(labels).enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, (&sj, &yj)) in scores.iter().zip(labels).enumerate() {
            if i == j || yj != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    if pairs == 0.0 {
        None
    } else {
        Some(wins / pairs)
    }
}

/// Straightforward two-pass Pearson correlation.
pub fn two_pass_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Cover-weighted conditional expectation of a tree with the features in
/// `fixed` pinned to `row` values.
fn cond_expect(tree: &DecisionTree, node: usize, row: &[f64], fixed: &[bool]) -> f64 {
    let n = &tree.nodes[node];
    if n.is_leaf {
        return n.value;
    }
    if fixed[n.feature] {
        let next = if row[n.feature] < n.threshold {
            n.left
        } else {
            n.right
        };
        return cond_expect(tree, next, row, fixed);
    }
    let l = &tree.nodes[n.left];
    let r = &tree.nodes[n.right];
    (l.cover * cond_expect(tree, n.left, row, fixed)
        + r.cover * cond_expect(tree, n.right, row, fixed))
        / n.cover
}

/// Exhaustive 2^p-subset Shapley values for one tree under the same
/// cover-weighted conditional-expectation convention the implementation
/// claims to compute.
pub fn exhaustive_tree_shap(tree: &DecisionTree, row: &[f64], p: usize) -> Vec<f64> {
    fn factorial(k: usize) -> f64 {
        (1..=k).map(|v| v as f64).product()
    }
    let mut phi = vec![0.0; p];
    for j in 0..p {
        for mask in 0u32..(1 << p) {
            if mask & (1 << j) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = factorial(s) * factorial(p - s - 1) / factorial(p);
            let mut fixed = vec![false; p];
            for (f, flag) in fixed.iter_mut().enumerate() {
                *flag = mask & (1 << f) != 0;
            }
            let without = cond_expect(tree, 0, row, &fixed);
            fixed[j] = true;
            let with = cond_expect(tree, 0, row, &fixed);
            phi[j] += weight * (with - without);
        }
    }
    phi
}

/// Random tree with bounded depth, random splits, and covers satisfying
/// parent = left + right. Structure is independent of any builder.
pub fn random_tree(p: usize, max_depth: usize, rng: &mut ChaCha8Rng) -> DecisionTree {
    fn grow(
        nodes: &mut Vec<TreeNode>,
        p: usize,
        depth: usize,
        max_depth: usize,
        cover: f64,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let make_leaf = depth >= max_depth || cover < 2.0 || rng.gen_bool(0.25);
        if make_leaf {
            nodes.push(TreeNode {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 0,
                value: rng.gen_range(-2.0..2.0),
                cover,
                is_leaf: true,
            });
            return nodes.len() - 1;
        }
        let idx = nodes.len();
        nodes.push(TreeNode {
            feature: rng.gen_range(0..p),
            threshold: rng.gen_range(0.05..0.95),
            left: 0,
            right: 0,
            value: 0.0,
            cover,
            is_leaf: false,
        });
        let left_cover = (cover * rng.gen_range(0.2..0.8)).max(1.0).floor();
        let right_cover = cover - left_cover;
        let left = grow(nodes, p, depth + 1, max_depth, left_cover, rng);
        let right = grow(nodes, p, depth + 1, max_depth, right_cover, rng);
        nodes[idx].left = left;
        nodes[idx].right = right;
        idx
    }
    let mut nodes = Vec::new();
    let cover = rng.gen_range(20.0..200.0_f64).floor();
    grow(&mut nodes, p, 0, max_depth, cover, rng);
    DecisionTree { nodes }
}

/// Seeded random binary-classification problem with both classes present.
pub fn random_problem(n: usize, p: usize, seed: u64) -> (EncodedMatrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut y: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r[0] + 0.4 * rng.gen::<f64>() > 0.7))
        .collect();
    y[0] = 1;
    y[1] = 0;
    (matrix_from_rows(&rows), y)
}
