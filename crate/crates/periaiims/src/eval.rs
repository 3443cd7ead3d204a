//! Stratified splitting and cross-validation, the six-metric suite with
//! bootstrap confidence intervals, grid search, and best-model selection.

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::models::{fit, Hyperparams, ModelFamily};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rank-based AUROC: P(score+ > score-) + 0.5 P(tie) over all
/// positive-negative pairs, computed from average ranks. `None` when a
/// class is absent.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tied score groups (1-based).
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&y, _)| y == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision as the step-sum over recall at descending score
/// thresholds. `None` when a class is absent.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == n {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < n {
        // Consume a whole tied-score group before evaluating the operating
        // point, so ties do not create artificial thresholds.
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Some(ap)
}

/// The six reported metrics plus average precision. Rank metrics are `None`
/// on single-class data; confusion metrics are always computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auroc: Option<f64>,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub average_precision: Option<f64>,
}

pub const METRIC_NAMES: [&str; 7] = [
    "auroc",
    "accuracy",
    "f1",
    "precision",
    "sensitivity",
    "specificity",
    "average_precision",
];

impl MetricSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "auroc" => self.auroc,
            "accuracy" => Some(self.accuracy),
            "f1" => Some(self.f1),
            "precision" => Some(self.precision),
            "sensitivity" => Some(self.sensitivity),
            "specificity" => Some(self.specificity),
            "average_precision" => self.average_precision,
            _ => None,
        }
    }
}

/// Confusion-matrix metrics at the threshold plus the rank metrics.
pub fn compute_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricSet> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidValue(format!(
            "scores ({}) and labels ({}) length mismatch",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to evaluate".to_string()));
    }
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, y) {
            (true, 1) => tp += 1,
            (true, _) => fp += 1,
            (false, 1) => fnn += 1,
            (false, _) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let sensitivity = ratio(tp, tp + fnn);
    let specificity = ratio(tn, tn + fp);
    let accuracy = (tp + tn) as f64 / scores.len() as f64;
    let f1 = if precision + sensitivity == 0.0 {
        0.0
    } else {
        2.0 * precision * sensitivity / (precision + sensitivity)
    };
    Ok(MetricSet {
        auroc: auroc(scores, labels),
        accuracy,
        f1,
        precision,
        sensitivity,
        specificity,
        average_precision: average_precision(scores, labels),
    })
}

/// Point estimate with a percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiEntry {
    pub point: f64,
    pub lo95: f64,
    pub hi95: f64,
}

/// Per-metric (point, lo95, hi95) from B resamples of (score, label) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCI {
    pub auroc: Option<CiEntry>,
    pub accuracy: CiEntry,
    pub f1: CiEntry,
    pub precision: CiEntry,
    pub sensitivity: CiEntry,
    pub specificity: CiEntry,
    pub average_precision: Option<CiEntry>,
    pub n_resamples: usize,
    /// Resamples that came out single-class and so skipped rank metrics.
    pub skipped_rank_resamples: usize,
}

impl MetricCI {
    pub fn entry(&self, name: &str) -> Option<CiEntry> {
        match name {
            "auroc" => self.auroc,
            "accuracy" => Some(self.accuracy),
            "f1" => Some(self.f1),
            "precision" => Some(self.precision),
            "sensitivity" => Some(self.sensitivity),
            "specificity" => Some(self.specificity),
            "average_precision" => self.average_precision,
            _ => None,
        }
    }
}

/// 2.5/97.5 percentiles with linear interpolation over sorted replicates.
fn percentile_interval(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let n = values.len();
        if n == 1 {
            return values[0];
        }
        let rank = p * (n - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let frac = rank - lo as f64;
        values[lo] + frac * (values[hi] - values[lo])
    };
    (q(0.025), q(0.975))
}

/// Percentile bootstrap over pairs, B resamples with replacement.
/// Deterministic given the seed and invariant to worker-thread counts.
pub fn bootstrap_ci(scores: &[f64], labels: &[u8], b: usize, seed: u64) -> Result<MetricCI> {
    if scores.len() < 2 {
        return Err(Error::Degenerate(
            "bootstrap needs at least 2 observations".to_string(),
        ));
    }
    let n = scores.len();
    let point = compute_metrics(scores, labels, 0.5)?;

    // Index vectors are drawn sequentially up front; replicate evaluation
    // can then run in any order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index_sets: Vec<Vec<usize>> = (0..b)
        .map(|_| {
            (0..n)
                .map(|_| rand::Rng::gen_range(&mut rng, 0..n))
                .collect()
        })
        .collect();

    let replicates: Vec<MetricSet> = index_sets
        .par_iter()
        .map(|idx| {
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            compute_metrics(&s, &y, 0.5).expect("resample of non-empty data")
        })
        .collect();

    let skipped = replicates.iter().filter(|m| m.auroc.is_none()).count();
    let ci = |name: &str| -> Option<CiEntry> {
        let point_v = point.get(name)?;
        let vals: Vec<f64> = replicates.iter().filter_map(|m| m.get(name)).collect();
        if vals.is_empty() {
            return Some(CiEntry {
                point: point_v,
                lo95: point_v,
                hi95: point_v,
            });
        }
        let (lo95, hi95) = percentile_interval(vals);
        Some(CiEntry {
            point: point_v,
            lo95,
            hi95,
        })
    };

    Ok(MetricCI {
        auroc: ci("auroc"),
        accuracy: ci("accuracy").unwrap(),
        f1: ci("f1").unwrap(),
        precision: ci("precision").unwrap(),
        sensitivity: ci("sensitivity").unwrap(),
        specificity: ci("specificity").unwrap(),
        average_precision: ci("average_precision"),
        n_resamples: b,
        skipped_rank_resamples: skipped,
    })
}

/// Stratified hold-out split: disjoint, exhaustive, class-balanced.
pub fn train_test_split(
    labels: &[u8],
    test_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Config(format!(
            "test_frac must lie in (0, 1), got {test_frac}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class {class} has {} member(s); cannot stratify",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_frac).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    if test.is_empty() || train.is_empty() {
        return Err(Error::Degenerate(
            "split produced an empty train or test set".to_string(),
        ));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A k-fold partition with per-fold class counts balanced to within one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Train indices for one fold: the complement of its validation rows.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (f, rows) in self.folds.iter().enumerate() {
            if f != fold {
                out.extend_from_slice(rows);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Stratified k-fold plan. Fold membership depends only on each row's class
/// and its within-class rank in input order, so permutations that preserve
/// within-class order keep rows in the same folds.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!(
            "k-fold needs k >= 2, got {k}; no validation possible"
        )));
    }
    if labels.len() < k {
        return Err(Error::Degenerate(format!(
            "{} rows cannot fill {k} folds",
            labels.len()
        )));
    }
    for class in [0u8, 1u8] {
        let count = labels.iter().filter(|&&y| y == class).count();
        if count < 2 {
            return Err(Error::Degenerate(format!(
                "class {class} has {count} member(s); every fold complement needs both classes"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in [0u8, 1u8] {
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        // Seeded fold order per class rank: a shuffled round-robin deal.
        let mut deal: Vec<usize> = (0..idx.len()).map(|r| r % k).collect();
        deal.shuffle(&mut rng);
        for (rank, &row) in idx.iter().enumerate() {
            folds[deal[rank]].push(row);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}

/// Mean validation AUROC per grid point; failures disqualify a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointResult {
    pub hp: Hyperparams,
    pub mean_auroc: Option<f64>,
    pub failures: Vec<String>,
}

/// Fits every grid point on each fold's training complement and scores the
/// held fold; returns the best point (ties to earlier grid order) plus the
/// per-point results.
pub fn grid_search(
    grid: &[Hyperparams],
    x: &EncodedMatrix,
    labels: &[u8],
    plan: &FoldPlan,
    seed: u64,
) -> Result<(Hyperparams, Vec<GridPointResult>)> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".to_string()));
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..plan.k).map(move |f| (g, f)))
        .collect();

    let fold_outcomes: Vec<(usize, usize, std::result::Result<Option<f64>, String>)> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let val_rows = &plan.folds[f];
            let train_rows = plan.train_indices(f);
            let x_train = x.subset_rows(&train_rows);
            let y_train: Vec<u8> = train_rows.iter().map(|&i| labels[i]).collect();
            let x_val = x.subset_rows(val_rows);
            let y_val: Vec<u8> = val_rows.iter().map(|&i| labels[i]).collect();
            let outcome = fit(&grid[g], &x_train, &y_train, seed ^ (f as u64))
                .and_then(|model| model.predict_proba(&x_val))
                .map(|scores| auroc(&scores, &y_val))
                .map_err(|e| e.to_string());
            (g, f, outcome)
        })
        .collect();

    let mut results = Vec::with_capacity(grid.len());
    for (g, hp) in grid.iter().enumerate() {
        let mut aucs = Vec::new();
        let mut failures = Vec::new();
        for (gg, f, outcome) in &fold_outcomes {
            if *gg != g {
                continue;
            }
            match outcome {
                Ok(Some(a)) => aucs.push(*a),
                Ok(None) => {} // single-class validation fold carries no rank signal
                Err(e) => failures.push(format!("fold {f}: {e}")),
            }
        }
        let mean_auroc = if failures.is_empty() && !aucs.is_empty() {
            Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
        } else {
            None
        };
        results.push(GridPointResult {
            hp: hp.clone(),
            mean_auroc,
            failures,
        });
    }

    let best = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.mean_auroc.map(|a| (i, a)))
        .max_by(|(ia, a), (ib, b)| {
            a.partial_cmp(b).unwrap().then(ib.cmp(ia)) // earlier grid order wins ties
        });

    match best {
        Some((i, _)) => Ok((results[i].hp.clone(), results)),
        None => {
            let detail: Vec<String> = results
                .iter()
                .enumerate()
                .map(|(i, r)| format!("point {i}: {}", r.failures.join("; ")))
                .collect();
            Err(Error::GridExhausted(detail.join(" | ")))
        }
    }
}

/// One competitor for best-model selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub family: ModelFamily,
    pub variant: crate::data::VariantKind,
    pub hp: Hyperparams,
    pub metrics: MetricCI,
    /// Deterministic fit-cost figure used for the time-complexity tie-break.
    pub fit_cost: f64,
}

/// Winner of one (surgery, outcome) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub winner: Candidate,
    /// Index of the winner in the input candidate order.
    pub winner_index: usize,
}

/// AUROC margin inside which candidates count as tied.
pub const SELECT_AUROC_TIE: f64 = 0.005;

fn interpretability_rank(family: ModelFamily) -> u8 {
    match family {
        ModelFamily::Logistic => 0,
        ModelFamily::NaiveBayes => 1,
        ModelFamily::Tree => 2,
        ModelFamily::RandomForest | ModelFamily::AdaBoost | ModelFamily::GradBoost => 3,
        ModelFamily::Mlp => 4,
    }
}

/// Picks the best candidate: highest test AUROC; ties within 0.005 broken
/// by lower fit cost, then by interpretability, then input order.
pub fn select_best(candidates: &[Candidate]) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput(
            "no candidates to select from".to_string(),
        ));
    }
    let auc = |c: &Candidate| {
        c.metrics
            .auroc
            .map(|e| e.point)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let best_auc = candidates
        .iter()
        .map(|c| auc(c))
        .fold(f64::NEG_INFINITY, f64::max);
    let winner_index = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| auc(c) >= best_auc - SELECT_AUROC_TIE)
        .min_by(|(ia, a), (ib, b)| {
            a.fit_cost
                .partial_cmp(&b.fit_cost)
                .unwrap()
                .then(interpretability_rank(a.family).cmp(&interpretability_rank(b.family)))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .unwrap();
    Ok(SelectionResult {
        winner: candidates[winner_index].clone(),
        winner_index,
    })
}

/// Deterministic proxy for training cost: rows x columns x a family- and
/// hyperparameter-dependent work factor. Used instead of wall time so the
/// selection (and every downstream report) is bit-reproducible.
pub fn fit_cost_estimate(hp: &Hyperparams, n_rows: usize, n_cols: usize) -> f64 {
    let n = n_rows as f64;
    let p = n_cols as f64;
    let work = match hp {
        Hyperparams::Logistic { max_iter, .. } => *max_iter as f64 * p,
        Hyperparams::NaiveBayes { .. } => 1.0,
        Hyperparams::Tree { max_depth, .. } => *max_depth as f64,
        Hyperparams::RandomForest {
            n_trees, max_depth, ..
        } => (*n_trees * *max_depth) as f64,
        Hyperparams::AdaBoost {
            n_rounds,
            stump_depth,
        } => (*n_rounds * *stump_depth) as f64,
        Hyperparams::GradBoost {
            n_rounds,
            max_depth,
            ..
        } => (*n_rounds * *max_depth) as f64,
        Hyperparams::Mlp {
            hidden_width,
            epochs,
            ..
        } => (*hidden_width * *epochs) as f64,
    };
    n * p * work
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_auroc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, (&si, &yi)) in scores.iter().zip(labels).enumerate() {
            for (j, (&sj, &yj)) in scores.iter().zip(labels).enumerate() {
                if i == j || yi != 1 || yj != 0 {
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
        wins / pairs
    }

    #[test]
    fn auroc_matches_pairwise_counting() {
        let scores = [0.9, 0.8, 0.7, 0.2];
        let labels = [1, 0, 1, 0];
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.75);
        assert_eq!(brute_force_auroc(&scores, &labels), 0.75);
    }

    #[test]
    fn auroc_equals_brute_force_with_ties() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(4..60);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..8) as f64) / 8.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[1] = 0;
            let fast = auroc(&scores, &labels).unwrap();
            let slow = brute_force_auroc(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn confusion_metrics_are_definitional() {
        // TP=2, FP=1, FN=1, TN=6 at threshold 0.5.
        let scores = [0.9, 0.8, 0.6, 0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let labels = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0];
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.sensitivity - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.specificity - 6.0 / 7.0).abs() < 1e-12);
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_separation_maxes_rank_metrics() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!(m.auroc.unwrap(), 1.0);
        assert_eq!(m.average_precision.unwrap(), 1.0);
    }

    #[test]
    fn single_class_marks_rank_metrics_undefined() {
        let scores = [0.9, 0.8, 0.2];
        let labels = [1, 1, 1];
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        assert!(m.auroc.is_none());
        assert!(m.average_precision.is_none());
        assert_eq!(m.sensitivity, 2.0 / 3.0);
    }

    #[test]
    fn complementing_scores_and_labels_swaps_sensitivity_specificity() {
        let scores = [0.9, 0.6, 0.4, 0.3, 0.8, 0.2];
        let labels = [1, 0, 1, 0, 1, 0];
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        let flipped_scores: Vec<f64> = scores.iter().map(|s| 1.0 - s + 1e-12).collect();
        let flipped_labels: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        let f = compute_metrics(&flipped_scores, &flipped_labels, 0.5).unwrap();
        assert!((m.sensitivity - f.specificity).abs() < 1e-12);
        assert!((m.specificity - f.sensitivity).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_on_constant_data_collapses_to_point() {
        // Fully constant pairs: every resample is identical.
        let scores = [0.7; 10];
        let labels = [1u8; 10];
        let ci = bootstrap_ci(&scores, &labels, 100, 5).unwrap();
        assert!(ci.auroc.is_none());
        assert_eq!(ci.accuracy.lo95, ci.accuracy.point);
        assert_eq!(ci.accuracy.hi95, ci.accuracy.point);
        assert_eq!(ci.accuracy.point, 1.0);

        // Constant scores with mixed labels: ranks tie at exactly 0.5 in
        // every two-class resample.
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let ci = bootstrap_ci(&scores, &labels, 100, 5).unwrap();
        let a = ci.auroc.unwrap();
        assert_eq!((a.point, a.lo95, a.hi95), (0.5, 0.5, 0.5));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scores: Vec<f64> = (0..60).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = (0..60).map(|_| rng.gen_range(0..2) as u8).collect();
        let a = bootstrap_ci(&scores, &labels, 100, 11).unwrap();
        let b = bootstrap_ci(&scores, &labels, 100, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_interval_brackets_replicate_median() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scores: Vec<f64> = (0..80).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = scores
            .iter()
            .map(|&s| u8::from(s + 0.3 * rng.gen::<f64>() > 0.6))
            .collect();
        let ci = bootstrap_ci(&scores, &labels, 100, 12).unwrap();
        let acc = ci.accuracy;
        assert!(acc.lo95 <= acc.hi95);
        assert!(acc.lo95 <= acc.point + 1e-9 && acc.point - 1e-9 <= acc.hi95);
    }

    #[test]
    fn split_is_exactly_stratified() {
        let mut labels = vec![1u8; 40];
        labels.extend(vec![0u8; 60]);
        let (train, test) = train_test_split(&labels, 0.2, 3).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        let test_pos = test.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(test_pos, 8);
        let mut all: Vec<usize> = train.iter().chain(&test).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let labels = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let a = train_test_split(&labels, 0.3, 7).unwrap();
        let b = train_test_split(&labels, 0.3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let labels = [1, 0, 0, 0, 0];
        assert!(train_test_split(&labels, 0.2, 1).is_err());
    }

    #[test]
    fn kfold_balances_positives_by_pigeonhole() {
        let labels = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let plan = stratified_kfold(&labels, 5, 2).unwrap();
        let mut total_pos = 0;
        for fold in &plan.folds {
            let pos = fold.iter().filter(|&&i| labels[i] == 1).count();
            assert!(pos <= 1);
            total_pos += pos;
        }
        assert_eq!(total_pos, 4);
        let mut all: Vec<usize> = plan.folds.iter().flatten().cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_rejects_k_of_one() {
        let labels = [1, 0, 1, 0];
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    #[test]
    fn kfold_is_equivariant_under_class_order_preserving_permutations() {
        // Interleave the classes differently while preserving each class's
        // internal order; fold membership must follow the rows.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..10 {
            let labels: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2) as u8).collect();
            if labels.iter().filter(|&&y| y == 1).count() < 2
                || labels.iter().filter(|&&y| y == 0).count() < 2
            {
                continue;
            }
            let plan = stratified_kfold(&labels, 4, trial).unwrap();
            let fold_of = |plan: &FoldPlan, row: usize| {
                plan.folds.iter().position(|f| f.contains(&row)).unwrap()
            };

            // Permutation: all positives first, then negatives (class order kept).
            let mut perm: Vec<usize> = Vec::new();
            perm.extend((0..20).filter(|&i| labels[i] == 1));
            perm.extend((0..20).filter(|&i| labels[i] == 0));
            let permuted: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
            let plan_p = stratified_kfold(&permuted, 4, trial).unwrap();
            for (new_pos, &orig) in perm.iter().enumerate() {
                assert_eq!(
                    fold_of(&plan, orig),
                    fold_of(&plan_p, new_pos),
                    "row {orig} changed folds under permutation"
                );
            }
        }
    }

    #[test]
    fn select_best_prefers_interpretable_on_ties() {
        let ci = |auc: f64| MetricCI {
            auroc: Some(CiEntry {
                point: auc,
                lo95: auc,
                hi95: auc,
            }),
            accuracy: CiEntry {
                point: 0.5,
                lo95: 0.5,
                hi95: 0.5,
            },
            f1: CiEntry {
                point: 0.5,
                lo95: 0.5,
                hi95: 0.5,
            },
            precision: CiEntry {
                point: 0.5,
                lo95: 0.5,
                hi95: 0.5,
            },
            sensitivity: CiEntry {
                point: 0.5,
                lo95: 0.5,
                hi95: 0.5,
            },
            specificity: CiEntry {
                point: 0.5,
                lo95: 0.5,
                hi95: 0.5,
            },
            average_precision: None,
            n_resamples: 100,
            skipped_rank_resamples: 0,
        };
        let cand = |family: ModelFamily, auc: f64, cost: f64| Candidate {
            family,
            variant: crate::data::VariantKind::IntraOp,
            hp: Hyperparams::NaiveBayes {
                laplace_alpha: 1.0,
                var_floor: 1e-9,
            },
            metrics: ci(auc),
            fit_cost: cost,
        };

        // Single candidate returns itself.
        let single = [cand(ModelFamily::Mlp, 0.7, 1.0)];
        assert_eq!(select_best(&single).unwrap().winner_index, 0);

        // Tie within tolerance: logistic beats the booster at equal cost.
        let tied = [
            cand(ModelFamily::GradBoost, 0.903, 5.0),
            cand(ModelFamily::Logistic, 0.900, 5.0),
        ];
        let sel = select_best(&tied).unwrap();
        assert_eq!(sel.winner.family, ModelFamily::Logistic);
        // Winner stays within the tie tolerance of the best competitor.
        assert!(sel.winner.metrics.auroc.unwrap().point >= 0.903 - SELECT_AUROC_TIE);

        // Strictly higher AUROC dominates everything else.
        let clear = [
            cand(ModelFamily::Logistic, 0.80, 1.0),
            cand(ModelFamily::Mlp, 0.90, 100.0),
        ];
        assert_eq!(select_best(&clear).unwrap().winner.family, ModelFamily::Mlp);

        // Within the tie band, lower fit cost wins before interpretability.
        let cost_tie = [
            cand(ModelFamily::Mlp, 0.902, 1.0),
            cand(ModelFamily::Logistic, 0.900, 2.0),
        ];
        assert_eq!(
            select_best(&cost_tie).unwrap().winner.family,
            ModelFamily::Mlp
        );
    }
}
