//! Shapley-value attribution for every model family.
//!
//! Tree ensembles get the exact path-dependent algorithm driven by node
//! cover counts; logistic models get the closed form against a background
//! mean; the remaining families get a seeded permutation-sampling estimate
//! with additivity enforced. Attribution sums obey local accuracy in the
//! declared output space: log-odds for logistic and gradient boosting,
//! probability otherwise.

use crate::data::INTRAOP_NUMERICS;
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::models::{DecisionTree, EnsembleKind, ModelState, TrainedModel, TreeEnsembleModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Space the attributions (and the base value) live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    Probability,
    LogOdds,
}

/// Per-sample, per-column attributions plus the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub phi: Vec<Vec<f64>>,
    pub base_value: f64,
    pub output_space: OutputSpace,
    /// Column names, aligned with `phi` columns.
    pub columns: Vec<String>,
}

impl ShapMatrix {
    pub fn n_rows(&self) -> usize {
        self.phi.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Attribution sum plus base for one row: the reconstructed output.
    pub fn reconstructed(&self, row: usize) -> f64 {
        self.base_value + self.phi[row].iter().sum::<f64>()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|c| c.as_str()))?;
        for row in &self.phi {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush()
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

// Path-dependent TreeSHAP (per-tree recursion over the unique feature path).

#[derive(Clone)]
struct PathItem {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

impl PathItem {
    fn empty() -> Self {
        PathItem {
            feature: None,
            zero_fraction: 0.0,
            one_fraction: 0.0,
            pweight: 0.0,
        }
    }
}

fn extend_path(
    path: &mut [PathItem],
    depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    path[depth] = PathItem {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    };
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut [PathItem], depth: usize, index: usize) {
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one =
                tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_sum(path: &[PathItem], depth: usize, index: usize) -> f64 {
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next_one / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].pweight / (zero_fraction * (depth - i) as f64);
        }
    }
    total * (depth + 1) as f64
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recurse(
    tree: &DecisionTree,
    row: &[f64],
    phi: &mut [f64],
    node: usize,
    path: &mut Vec<PathItem>,
    depth: usize,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: Option<usize>,
) {
    if path.len() <= depth {
        path.resize(depth + 1, PathItem::empty());
    }
    extend_path(path, depth, parent_zero, parent_one, parent_feature);
    let n = &tree.nodes[node];

    if n.is_leaf {
        for i in 1..=depth {
            let w = unwound_sum(path, depth, i);
            let item = &path[i];
            phi[item.feature.unwrap()] += w * (item.one_fraction - item.zero_fraction) * n.value;
        }
        return;
    }

    let (hot, cold) = if row[n.feature] < n.threshold {
        (n.left, n.right)
    } else {
        (n.right, n.left)
    };
    let hot_zero = tree.nodes[hot].cover / n.cover;
    let cold_zero = tree.nodes[cold].cover / n.cover;
    let mut incoming_zero = 1.0;
    let mut incoming_one = 1.0;
    let mut depth = depth;
    // A feature already on the path is unwound before re-extending.
    if let Some(k) = (1..=depth).find(|&i| path[i].feature == Some(n.feature)) {
        incoming_zero = path[k].zero_fraction;
        incoming_one = path[k].one_fraction;
        unwind_path(path, depth, k);
        depth -= 1;
    }

    let saved: Vec<PathItem> = path[..=depth].to_vec();
    tree_shap_recurse(
        tree,
        row,
        phi,
        hot,
        path,
        depth + 1,
        hot_zero * incoming_zero,
        incoming_one,
        Some(n.feature),
    );
    path[..=depth].clone_from_slice(&saved);
    tree_shap_recurse(
        tree,
        row,
        phi,
        cold,
        path,
        depth + 1,
        cold_zero * incoming_zero,
        0.0,
        Some(n.feature),
    );
    path[..=depth].clone_from_slice(&saved);
}

/// Exact path-dependent Shapley values for one tree, scaled by `weight`
/// and accumulated into `phi`.
pub fn tree_shap_single(tree: &DecisionTree, row: &[f64], phi: &mut [f64], weight: f64) {
    let mut local = vec![0.0; phi.len()];
    let mut path = Vec::new();
    tree_shap_recurse(tree, row, &mut local, 0, &mut path, 0, 1.0, 1.0, None);
    for (p, l) in phi.iter_mut().zip(&local) {
        *p += weight * l;
    }
}

fn ensemble_of(model: &TrainedModel) -> Result<&TreeEnsembleModel> {
    match &model.state {
        ModelState::Trees(ens) => Ok(ens),
        _ => Err(Error::Config(format!(
            "tree_shap needs a tree-based family, got {}",
            model.family().name()
        ))),
    }
}

/// Exact Shapley values for a tree ensemble under the path-dependent
/// (cover-weighted) feature-perturbation convention, summed across trees
/// with stage weights. Output space is log-odds for the gradient booster
/// and probability otherwise.
pub fn tree_shap(model: &TrainedModel, x: &EncodedMatrix) -> Result<ShapMatrix> {
    let ens = ensemble_of(model)?;
    if !ens.covers_consistent() {
        return Err(Error::InvalidValue(
            "tree cover counts are missing or inconsistent".to_string(),
        ));
    }
    if x.signature() != model.columns {
        return Err(Error::Provenance(
            "matrix columns do not match the model's training columns".to_string(),
        ));
    }
    let p = x.n_cols();
    let base_value = ens.base_score
        + ens
            .trees
            .iter()
            .zip(&ens.stage_weights)
            .map(|(t, w)| w * t.expected_value())
            .sum::<f64>();

    let phi: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut phi_row = vec![0.0; p];
            for (tree, &w) in ens.trees.iter().zip(&ens.stage_weights) {
                tree_shap_single(tree, row, &mut phi_row, w);
            }
            phi_row
        })
        .collect();

    let output_space = match ens.kind {
        EnsembleKind::Probability => OutputSpace::Probability,
        EnsembleKind::LogOdds => OutputSpace::LogOdds,
    };
    Ok(ShapMatrix {
        phi,
        base_value,
        output_space,
        columns: x.signature(),
    })
}

/// Closed-form Shapley values for the logistic model in log-odds space:
/// phi_j = w_j (x_j - background mean_j).
pub fn linear_shap(
    model: &TrainedModel,
    x: &EncodedMatrix,
    background: &EncodedMatrix,
) -> Result<ShapMatrix> {
    let ModelState::Logistic(lr) = &model.state else {
        return Err(Error::Config(format!(
            "linear_shap needs a logistic model, got {}",
            model.family().name()
        )));
    };
    if background.n_rows() == 0 {
        return Err(Error::EmptyInput(
            "background must be non-empty".to_string(),
        ));
    }
    if x.signature() != model.columns || background.signature() != model.columns {
        return Err(Error::Provenance(
            "matrix columns do not match the model's training columns".to_string(),
        ));
    }
    let p = x.n_cols();
    let mut mean = vec![0.0; p];
    for i in 0..background.n_rows() {
        for (m, v) in mean.iter_mut().zip(background.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= background.n_rows() as f64;
    }
    let base_value = lr.intercept
        + mean
            .iter()
            .zip(&lr.weights)
            .map(|(m, w)| m * w)
            .sum::<f64>();

    let phi = (0..x.n_rows())
        .map(|i| {
            x.row(i)
                .iter()
                .zip(&lr.weights)
                .zip(&mean)
                .map(|((xv, w), m)| w * (xv - m))
                .collect()
        })
        .collect();

    Ok(ShapMatrix {
        phi,
        base_value,
        output_space: OutputSpace::LogOdds,
        columns: x.signature(),
    })
}

/// Monte-Carlo permutation estimate of Shapley values for one row against
/// a background set, with the additivity residual redistributed in
/// proportion to attribution magnitude.
pub fn sampling_shap<F>(
    predict: F,
    row: &[f64],
    background: &EncodedMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let p = row.len();
    if background.n_rows() == 0 {
        return Err(Error::EmptyInput(
            "background must be non-empty".to_string(),
        ));
    }
    if n_samples < p {
        return Err(Error::Config(format!(
            "n_samples ({n_samples}) must be at least the number of features ({p})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = vec![0.0; p];
    let mut order: Vec<usize> = (0..p).collect();

    for _ in 0..n_samples {
        let b = rng.gen_range(0..background.n_rows());
        order.shuffle(&mut rng);
        let mut z: Vec<f64> = background.row(b).to_vec();
        let mut prev = predict(&z);
        for &j in &order {
            z[j] = row[j];
            let next = predict(&z);
            phi[j] += next - prev;
            prev = next;
        }
    }
    for v in &mut phi {
        *v /= n_samples as f64;
    }

    // Enforce local accuracy exactly.
    let base = (0..background.n_rows())
        .map(|i| predict(background.row(i)))
        .sum::<f64>()
        / background.n_rows() as f64;
    let residual = predict(row) - base - phi.iter().sum::<f64>();
    let mass: f64 = phi.iter().map(|v| v.abs()).sum();
    if mass > 0.0 {
        for v in phi.iter_mut() {
            *v += residual * v.abs() / mass;
        }
    } else if residual != 0.0 {
        for v in phi.iter_mut() {
            *v += residual / p as f64;
        }
    }
    Ok(phi)
}

/// Dispatches to the family-appropriate attribution algorithm.
///
/// `background` supplies the reference distribution for the linear and
/// sampling paths (tree ensembles need none); `n_samples` and `seed` only
/// affect the sampling path.
pub fn explain_model(
    model: &TrainedModel,
    x: &EncodedMatrix,
    background: &EncodedMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<ShapMatrix> {
    match &model.state {
        ModelState::Trees(_) => tree_shap(model, x),
        ModelState::Logistic(_) => linear_shap(model, x, background),
        ModelState::NaiveBayes(_) | ModelState::Mlp(_) => {
            if x.signature() != model.columns || background.signature() != model.columns {
                return Err(Error::Provenance(
                    "matrix columns do not match the model's training columns".to_string(),
                ));
            }
            let predict = |row: &[f64]| match &model.state {
                ModelState::NaiveBayes(m) => m.predict_proba_row(row),
                ModelState::Mlp(m) => m.forward(row),
                _ => unreachable!(),
            };
            let base = (0..background.n_rows())
                .map(|i| predict(background.row(i)))
                .sum::<f64>()
                / background.n_rows().max(1) as f64;
            let phi: Vec<Vec<f64>> = (0..x.n_rows())
                .into_par_iter()
                .map(|i| sampling_shap(predict, x.row(i), background, n_samples, seed ^ (i as u64)))
                .collect::<Result<_>>()?;
            Ok(ShapMatrix {
                phi,
                base_value: base,
                output_space: OutputSpace::Probability,
                columns: x.signature(),
            })
        }
    }
}

/// Ranked importance of one encoded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImpact {
    pub column: usize,
    pub name: String,
    pub mean_abs_phi: f64,
    /// Spearman correlation between the column's values and its
    /// attributions; the sign says which direction raises risk.
    pub directionality: f64,
}

/// Average ranks (ties averaged), 1-based.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// Top-k columns by mean |phi| (descending, ties to the lower column
/// index), each with its directionality. `k` beyond the column count
/// returns all columns.
pub fn rank_impacts(shap: &ShapMatrix, x: &EncodedMatrix, k: usize) -> Vec<FeatureImpact> {
    let p = shap.n_cols();
    let n = shap.n_rows().max(1) as f64;
    let mut impacts: Vec<FeatureImpact> = (0..p)
        .map(|j| {
            let mean_abs = shap.phi.iter().map(|row| row[j].abs()).sum::<f64>() / n;
            let col_vals: Vec<f64> = (0..shap.n_rows()).map(|i| x.get(i, j)).collect();
            let phi_vals: Vec<f64> = shap.phi.iter().map(|row| row[j]).collect();
            FeatureImpact {
                column: j,
                name: shap.columns[j].clone(),
                mean_abs_phi: mean_abs,
                directionality: spearman(&col_vals, &phi_vals),
            }
        })
        .collect();
    impacts.sort_by(|a, b| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap()
            .then(a.column.cmp(&b.column))
    });
    impacts.truncate(k.min(p));
    impacts
}

/// Impacts restricted to the eight intraoperative numerics, keyed by
/// feature name (consumed by the disruption detector).
pub fn intraop_impacts(impacts: &[FeatureImpact]) -> Vec<(String, f64)> {
    impacts
        .iter()
        .filter(|imp| INTRAOP_NUMERICS.contains(&imp.name.as_str()))
        .map(|imp| (imp.name.clone(), imp.directionality))
        .collect()
}

/// Seeded background subsample of at most `cap` rows: the reference set
/// for the linear and sampling attribution paths.
pub fn background_sample(x: &EncodedMatrix, cap: usize, seed: u64) -> EncodedMatrix {
    if x.n_rows() <= cap {
        return x.clone();
    }
    let mut rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let mut chosen = rows[..cap].to_vec();
    chosen.sort_unstable();
    x.subset_rows(&chosen)
}
