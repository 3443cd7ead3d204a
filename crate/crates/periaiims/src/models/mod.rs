//! The classifier zoo behind one fit / predict-probability contract.
//!
//! Seven families: logistic regression, naive Bayes, a single CART tree,
//! a bagged forest, adaptive boosting over stumps, second-order gradient
//! boosting, and a one-hidden-layer perceptron. Fits are deterministic
//! given the seed, across runs and across worker-thread counts.

pub mod ada;
pub mod forest;
pub mod gbdt;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod presort;
pub mod tree;

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use serde::{Deserialize, Serialize};

pub use ada::AdaEnsemble;
pub use gbdt::GradBoostParams;
pub use logistic::LogisticModel;
pub use mlp::{MlpModel, MlpParams};
pub use naive_bayes::NaiveBayesModel;
pub use tree::{DecisionTree, LeafKind, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    NaiveBayes,
    Tree,
    RandomForest,
    AdaBoost,
    GradBoost,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 7] = [
        ModelFamily::Logistic,
        ModelFamily::NaiveBayes,
        ModelFamily::Tree,
        ModelFamily::RandomForest,
        ModelFamily::AdaBoost,
        ModelFamily::GradBoost,
        ModelFamily::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Logistic => "logistic",
            ModelFamily::NaiveBayes => "naive_bayes",
            ModelFamily::Tree => "tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::AdaBoost => "ada_boost",
            ModelFamily::GradBoost => "grad_boost",
            ModelFamily::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family {s}")))
    }

    pub fn is_tree_based(&self) -> bool {
        matches!(
            self,
            ModelFamily::Tree
                | ModelFamily::RandomForest
                | ModelFamily::AdaBoost
                | ModelFamily::GradBoost
        )
    }
}

/// Family-tagged hyperparameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Logistic {
        l2_lambda: f64,
        max_iter: usize,
        tol: f64,
    },
    NaiveBayes {
        laplace_alpha: f64,
        var_floor: f64,
    },
    Tree {
        max_depth: usize,
        min_samples_leaf: usize,
    },
    RandomForest {
        n_trees: usize,
        max_depth: usize,
        /// `None` = ceil(sqrt(p)).
        features_per_split: Option<usize>,
        bootstrap: bool,
    },
    AdaBoost {
        n_rounds: usize,
        stump_depth: usize,
    },
    GradBoost {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
        l2_lambda: f64,
        gamma_min_gain: f64,
        min_child_hessian: f64,
    },
    Mlp {
        hidden_width: usize,
        learning_rate: f64,
        epochs: usize,
        batch_size: usize,
        l2_lambda: f64,
    },
}

impl Hyperparams {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparams::Logistic { .. } => ModelFamily::Logistic,
            Hyperparams::NaiveBayes { .. } => ModelFamily::NaiveBayes,
            Hyperparams::Tree { .. } => ModelFamily::Tree,
            Hyperparams::RandomForest { .. } => ModelFamily::RandomForest,
            Hyperparams::AdaBoost { .. } => ModelFamily::AdaBoost,
            Hyperparams::GradBoost { .. } => ModelFamily::GradBoost,
            Hyperparams::Mlp { .. } => ModelFamily::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Hyperparams(msg.to_string()));
        match *self {
            Hyperparams::Logistic {
                l2_lambda,
                max_iter,
                tol,
            } => {
                if l2_lambda < 0.0 {
                    return bad("logistic l2_lambda must be >= 0");
                }
                if max_iter < 1 {
                    return bad("logistic max_iter must be >= 1");
                }
                if tol <= 0.0 {
                    return bad("logistic tol must be > 0");
                }
            }
            Hyperparams::NaiveBayes {
                laplace_alpha,
                var_floor,
            } => {
                if laplace_alpha < 0.0 {
                    return bad("naive_bayes laplace_alpha must be >= 0");
                }
                if var_floor <= 0.0 {
                    return bad("naive_bayes var_floor must be > 0");
                }
            }
            Hyperparams::Tree {
                max_depth,
                min_samples_leaf,
            } => {
                if max_depth < 1 || min_samples_leaf < 1 {
                    return bad("tree counts must be >= 1");
                }
            }
            Hyperparams::RandomForest {
                n_trees,
                max_depth,
                features_per_split,
                ..
            } => {
                if n_trees < 1 || max_depth < 1 {
                    return bad("random_forest counts must be >= 1");
                }
                if features_per_split == Some(0) {
                    return bad("random_forest features_per_split must be >= 1");
                }
            }
            Hyperparams::AdaBoost {
                n_rounds,
                stump_depth,
            } => {
                if n_rounds < 1 || stump_depth < 1 {
                    return bad("ada_boost counts must be >= 1");
                }
            }
            Hyperparams::GradBoost {
                n_rounds,
                learning_rate,
                max_depth,
                l2_lambda,
                gamma_min_gain,
                min_child_hessian,
            } => {
                if n_rounds < 1 || max_depth < 1 {
                    return bad("grad_boost counts must be >= 1");
                }
                if learning_rate <= 0.0 {
                    return bad("grad_boost learning_rate must be > 0");
                }
                if l2_lambda < 0.0 || gamma_min_gain < 0.0 || min_child_hessian < 0.0 {
                    return bad("grad_boost penalties must be >= 0");
                }
            }
            Hyperparams::Mlp {
                hidden_width,
                learning_rate,
                epochs,
                batch_size,
                l2_lambda,
            } => {
                if hidden_width < 1 || epochs < 1 || batch_size < 1 {
                    return bad("mlp counts must be >= 1");
                }
                if learning_rate <= 0.0 {
                    return bad("mlp learning_rate must be > 0");
                }
                if l2_lambda < 0.0 {
                    return bad("mlp l2_lambda must be >= 0");
                }
            }
        }
        Ok(())
    }
}

/// How a tree ensemble's leaf values combine into an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Stage-weighted sum of leaf probabilities (single tree, forest) or
    /// votes (adaptive boosting): already a probability.
    Probability,
    /// Stage-weighted sum of leaf weights plus base score: a log-odds
    /// margin passed through the sigmoid.
    LogOdds,
}

/// Unified tree-ensemble state shared by the four tree families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub kind: EnsembleKind,
    pub trees: Vec<DecisionTree>,
    /// One multiplier per tree.
    pub stage_weights: Vec<f64>,
    /// Additive offset in the ensemble's output space.
    pub base_score: f64,
    /// Adaptive-boosting rounds skipped for weighted error >= 0.5.
    pub skipped_rounds: usize,
}

impl TreeEnsembleModel {
    /// Raw additive output: base + sum of weighted tree values.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .zip(&self.stage_weights)
                .map(|(t, w)| w * t.predict_row(row))
                .sum::<f64>()
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Probability => self.margin(row).clamp(0.0, 1.0),
            EnsembleKind::LogOdds => logistic::sigmoid(self.margin(row)),
        }
    }

    pub fn covers_consistent(&self) -> bool {
        self.trees.iter().all(DecisionTree::covers_consistent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelState {
    Logistic(LogisticModel),
    NaiveBayes(NaiveBayesModel),
    Trees(TreeEnsembleModel),
    Mlp(MlpModel),
}

/// A fitted model: hyperparameters, learned state, and the training-matrix
/// column signature for provenance checks at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub hp: Hyperparams,
    pub seed: u64,
    pub columns: Vec<String>,
    pub state: ModelState,
}

/// Serialization wrapper with an explicit format version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: TrainedModel,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.hp.family()
    }

    fn check_provenance(&self, x: &EncodedMatrix) -> Result<()> {
        let sig = x.signature();
        if sig.len() != self.columns.len() {
            return Err(Error::Provenance(format!(
                "model trained on {} columns, matrix has {}",
                self.columns.len(),
                sig.len()
            )));
        }
        for (i, (a, b)) in self.columns.iter().zip(&sig).enumerate() {
            if a != b {
                return Err(Error::Provenance(format!(
                    "column {i} mismatch: trained on {a:?}, got {b:?}"
                )));
            }
        }
        Ok(())
    }

    /// One probability per row, in [0, 1]; empty input gives an empty vector.
    pub fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        self.check_provenance(x)?;
        let out = (0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                match &self.state {
                    ModelState::Logistic(m) => m.predict_proba_row(row),
                    ModelState::NaiveBayes(m) => m.predict_proba_row(row),
                    ModelState::Trees(m) => m.predict_proba_row(row),
                    ModelState::Mlp(m) => m.forward(row),
                }
            })
            .collect();
        Ok(out)
    }

    /// Raw additive margin for log-odds families (logistic, grad_boost);
    /// probability for the rest. This is the space attribution sums live in.
    pub fn predict_margin(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        self.check_provenance(x)?;
        Ok((0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                match &self.state {
                    ModelState::Logistic(m) => m.margin(row),
                    ModelState::Trees(m) if m.kind == EnsembleKind::LogOdds => m.margin(row),
                    ModelState::Trees(m) => m.margin(row).clamp(0.0, 1.0),
                    ModelState::NaiveBayes(m) => m.predict_proba_row(row),
                    ModelState::Mlp(m) => m.forward(row),
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<TrainedModel> {
        let doc: ModelDocument = serde_json::from_str(json)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

/// Fits one model family. Requires n >= 2, both classes present (naive
/// Bayes tolerates a single class), finite inputs, and valid hyperparameters.
pub fn fit(hp: &Hyperparams, x: &EncodedMatrix, y: &[u8], seed: u64) -> Result<TrainedModel> {
    hp.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::InvalidValue(format!(
            "matrix has {} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() < 2 {
        return Err(Error::Degenerate("fit needs at least 2 rows".to_string()));
    }
    for i in 0..x.n_rows() {
        if x.row(i).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "row {i} contains a non-finite value"
            )));
        }
    }
    let single_class = y.iter().all(|&v| v == y[0]);
    if single_class && hp.family() != ModelFamily::NaiveBayes {
        return Err(Error::Degenerate(format!(
            "{} cannot fit single-class labels",
            hp.family().name()
        )));
    }

    let all_rows: Vec<usize> = (0..x.n_rows()).collect();
    let state = match *hp {
        Hyperparams::Logistic {
            l2_lambda,
            max_iter,
            tol,
        } => ModelState::Logistic(logistic::fit_logistic(x, y, l2_lambda, max_iter, tol)?),
        Hyperparams::NaiveBayes {
            laplace_alpha,
            var_floor,
        } => ModelState::NaiveBayes(naive_bayes::fit_naive_bayes(
            x,
            y,
            laplace_alpha,
            var_floor,
        )?),
        Hyperparams::Tree {
            max_depth,
            min_samples_leaf,
        } => {
            let t = tree::build_cart(
                x,
                &all_rows,
                y,
                None,
                &tree::CartParams {
                    max_depth,
                    min_samples_leaf,
                    features_per_split: None,
                    leaf_kind: LeafKind::Probability,
                },
                None,
            );
            ModelState::Trees(TreeEnsembleModel {
                kind: EnsembleKind::Probability,
                trees: vec![t],
                stage_weights: vec![1.0],
                base_score: 0.0,
                skipped_rounds: 0,
            })
        }
        Hyperparams::RandomForest {
            n_trees,
            max_depth,
            features_per_split,
            bootstrap,
        } => {
            let trees = forest::fit_forest(
                x,
                y,
                &forest::ForestParams {
                    n_trees,
                    max_depth,
                    features_per_split,
                    bootstrap,
                },
                seed,
            );
            let w = 1.0 / trees.len() as f64;
            let n = trees.len();
            ModelState::Trees(TreeEnsembleModel {
                kind: EnsembleKind::Probability,
                trees,
                stage_weights: vec![w; n],
                base_score: 0.0,
                skipped_rounds: 0,
            })
        }
        Hyperparams::AdaBoost {
            n_rounds,
            stump_depth,
        } => {
            let ens = ada::fit_ada_boost(
                x,
                y,
                &ada::AdaParams {
                    n_rounds,
                    stump_depth,
                },
            );
            let weights = ens.vote_weights();
            let base = if weights.is_empty() { ens.prior } else { 0.0 };
            ModelState::Trees(TreeEnsembleModel {
                kind: EnsembleKind::Probability,
                trees: ens.stumps,
                stage_weights: weights,
                base_score: base,
                skipped_rounds: ens.skipped_rounds,
            })
        }
        Hyperparams::GradBoost {
            n_rounds,
            learning_rate,
            max_depth,
            l2_lambda,
            gamma_min_gain,
            min_child_hessian,
        } => {
            let boosted = gbdt::fit_grad_boost(
                x,
                y,
                &GradBoostParams {
                    n_rounds,
                    learning_rate,
                    max_depth,
                    l2_lambda,
                    gamma_min_gain,
                    min_child_hessian,
                },
            );
            let n = boosted.trees.len();
            ModelState::Trees(TreeEnsembleModel {
                kind: EnsembleKind::LogOdds,
                trees: boosted.trees,
                stage_weights: vec![learning_rate; n],
                base_score: boosted.base_score,
                skipped_rounds: 0,
            })
        }
        Hyperparams::Mlp {
            hidden_width,
            learning_rate,
            epochs,
            batch_size,
            l2_lambda,
        } => ModelState::Mlp(mlp::fit_mlp(
            x,
            y,
            &MlpParams {
                hidden_width,
                learning_rate,
                epochs,
                batch_size,
                l2_lambda,
            },
            seed,
        )?),
    };

    Ok(TrainedModel {
        hp: hp.clone(),
        seed,
        columns: x.signature(),
        state,
    })
}

/// Compares analytic parameter gradients against central finite differences
/// at a seeded random parameter point. Returns the max relative error.
pub fn loss_gradient_check(
    family: ModelFamily,
    x: &EncodedMatrix,
    y: &[u8],
    hp: &Hyperparams,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput(
            "gradient check needs at least one row".to_string(),
        ));
    }
    let rel = |a: f64, f: f64| (a - f).abs() / (a.abs() + f.abs()).max(1e-6);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    match family {
        ModelFamily::Logistic => {
            let l2 = match hp {
                Hyperparams::Logistic { l2_lambda, .. } => *l2_lambda,
                _ => return Err(Error::Hyperparams("expected logistic hp".to_string())),
            };
            let p = x.n_cols();
            let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: f64 = rng.gen_range(-1.0..1.0);
            let (gw, gb) = logistic::logistic_gradient(x, y, &w, b, l2);
            let mut max_rel = 0.0f64;
            for k in 0..=p {
                let perturb = |delta: f64| -> f64 {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if k < p {
                        w2[k] += delta;
                    } else {
                        b2 += delta;
                    }
                    logistic::logistic_loss(x, y, &w2, b2, l2)
                };
                let fd = (perturb(eps) - perturb(-eps)) / (2.0 * eps);
                let analytic = if k < p { gw[k] } else { gb };
                max_rel = max_rel.max(rel(analytic, fd));
            }
            Ok(max_rel)
        }
        ModelFamily::Mlp => {
            let (hidden, l2) = match hp {
                Hyperparams::Mlp {
                    hidden_width,
                    l2_lambda,
                    ..
                } => (*hidden_width, *l2_lambda),
                _ => return Err(Error::Hyperparams("expected mlp hp".to_string())),
            };
            let mut model = MlpModel::init(x.n_cols(), hidden, &mut rng);
            let rows: Vec<usize> = (0..x.n_rows()).collect();
            let analytic = model.gradient(x, y, &rows, l2);
            let p0 = model.params();
            let mut max_rel = 0.0f64;
            for k in 0..p0.len() {
                let mut plus = p0.clone();
                plus[k] += eps;
                model.set_params(&plus);
                let lp = model.loss(x, y, &rows, l2);
                let mut minus = p0.clone();
                minus[k] -= eps;
                model.set_params(&minus);
                let lm = model.loss(x, y, &rows, l2);
                let fd = (lp - lm) / (2.0 * eps);
                max_rel = max_rel.max(rel(analytic[k], fd));
            }
            Ok(max_rel)
        }
        other => Err(Error::Config(format!(
            "gradient check supports logistic and mlp, not {}",
            other.name()
        ))),
    }
}

/// Version-pinned default hyperparameter grids (small by construction).
pub fn default_grid(family: ModelFamily) -> Vec<Hyperparams> {
    match family {
        ModelFamily::Logistic => vec![
            Hyperparams::Logistic {
                l2_lambda: 1e-4,
                max_iter: 100,
                tol: 1e-8,
            },
            Hyperparams::Logistic {
                l2_lambda: 1e-2,
                max_iter: 100,
                tol: 1e-8,
            },
        ],
        ModelFamily::NaiveBayes => vec![Hyperparams::NaiveBayes {
            laplace_alpha: 1.0,
            var_floor: 1e-9,
        }],
        ModelFamily::Tree => vec![
            Hyperparams::Tree {
                max_depth: 4,
                min_samples_leaf: 5,
            },
            Hyperparams::Tree {
                max_depth: 8,
                min_samples_leaf: 2,
            },
        ],
        ModelFamily::RandomForest => vec![
            Hyperparams::RandomForest {
                n_trees: 30,
                max_depth: 8,
                features_per_split: None,
                bootstrap: true,
            },
            Hyperparams::RandomForest {
                n_trees: 50,
                max_depth: 10,
                features_per_split: None,
                bootstrap: true,
            },
        ],
        ModelFamily::AdaBoost => vec![
            Hyperparams::AdaBoost {
                n_rounds: 40,
                stump_depth: 1,
            },
            Hyperparams::AdaBoost {
                n_rounds: 40,
                stump_depth: 2,
            },
        ],
        ModelFamily::GradBoost => vec![
            Hyperparams::GradBoost {
                n_rounds: 60,
                learning_rate: 0.2,
                max_depth: 3,
                l2_lambda: 1.0,
                gamma_min_gain: 0.0,
                min_child_hessian: 1.0,
            },
            Hyperparams::GradBoost {
                n_rounds: 40,
                learning_rate: 0.3,
                max_depth: 3,
                l2_lambda: 1.0,
                gamma_min_gain: 0.0,
                min_child_hessian: 1.0,
            },
            Hyperparams::GradBoost {
                n_rounds: 80,
                learning_rate: 0.15,
                max_depth: 2,
                l2_lambda: 1.0,
                gamma_min_gain: 0.0,
                min_child_hessian: 1.0,
            },
        ],
        ModelFamily::Mlp => vec![Hyperparams::Mlp {
            hidden_width: 16,
            learning_rate: 0.3,
            epochs: 20,
            batch_size: 64,
            l2_lambda: 1e-4,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::testutil::matrix_from;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, p: usize, seed: u64) -> (EncodedMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = matrix_from(&refs);
        let mut y: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * rng.gen::<f64>() > 0.7))
            .collect();
        y[0] = 0;
        y[1] = 1;
        (x, y)
    }

    #[test]
    fn every_family_outputs_bounded_probabilities() {
        let (x, y) = random_problem(60, 4, 1);
        for family in ModelFamily::ALL {
            for hp in default_grid(family) {
                let model = fit(&hp, &x, &y, 7).unwrap();
                let probs = model.predict_proba(&x).unwrap();
                assert_eq!(probs.len(), 60);
                assert!(
                    probs
                        .iter()
                        .all(|p| p.is_finite() && (0.0..=1.0).contains(p)),
                    "{family:?} emitted out-of-range probabilities"
                );
            }
        }
    }

    #[test]
    fn empty_matrix_predicts_empty_vector() {
        let (x, y) = random_problem(20, 3, 2);
        let hp = &default_grid(ModelFamily::Logistic)[0];
        let model = fit(hp, &x, &y, 1).unwrap();
        let empty = x.subset_rows(&[]);
        assert!(model.predict_proba(&empty).unwrap().is_empty());
    }

    #[test]
    fn provenance_mismatch_names_the_column() {
        let (x, y) = random_problem(20, 3, 3);
        let hp = &default_grid(ModelFamily::Tree)[0];
        let model = fit(hp, &x, &y, 1).unwrap();
        let mut other = x.clone();
        other.columns[1].source = crate::ingest::ColumnSource::Feature("impostor".to_string());
        let err = model.predict_proba(&other).unwrap_err();
        assert!(err.to_string().contains("impostor"), "{err}");
    }

    #[test]
    fn single_class_fit_fails_except_naive_bayes() {
        let (x, _) = random_problem(10, 2, 4);
        let y = vec![1u8; 10];
        for family in ModelFamily::ALL {
            let hp = &default_grid(family)[0];
            let r = fit(hp, &x, &y, 0);
            if family == ModelFamily::NaiveBayes {
                assert!(r.is_ok());
            } else {
                assert!(r.is_err(), "{family:?} accepted single-class labels");
            }
        }
    }

    #[test]
    fn fits_are_seed_deterministic() {
        let (x, y) = random_problem(50, 4, 5);
        for family in ModelFamily::ALL {
            let hp = &default_grid(family)[0];
            let a = fit(hp, &x, &y, 42).unwrap();
            let b = fit(hp, &x, &y, 42).unwrap();
            assert_eq!(a, b, "{family:?} not deterministic");
        }
    }

    #[test]
    fn forest_fit_is_thread_count_invariant() {
        let (x, y) = random_problem(60, 5, 6);
        let hp = Hyperparams::RandomForest {
            n_trees: 12,
            max_depth: 6,
            features_per_split: Some(2),
            bootstrap: true,
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| fit(&hp, &x, &y, 9).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| fit(&hp, &x, &y, 9).unwrap());
        assert_eq!(single, multi);
    }

    #[test]
    fn tree_family_covers_are_consistent() {
        let (x, y) = random_problem(80, 4, 7);
        for family in [
            ModelFamily::Tree,
            ModelFamily::RandomForest,
            ModelFamily::AdaBoost,
            ModelFamily::GradBoost,
        ] {
            let hp = &default_grid(family)[0];
            let model = fit(hp, &x, &y, 3).unwrap();
            let ModelState::Trees(ens) = &model.state else {
                panic!("expected tree state");
            };
            assert!(ens.covers_consistent(), "{family:?} cover counts broken");
        }
    }

    #[test]
    fn gradient_checks_pass_for_logistic_and_mlp() {
        let (x, y) = random_problem(25, 3, 8);
        let lr_hp = Hyperparams::Logistic {
            l2_lambda: 0.01,
            max_iter: 100,
            tol: 1e-8,
        };
        let err = loss_gradient_check(ModelFamily::Logistic, &x, &y, &lr_hp, 1e-5, 0).unwrap();
        assert!(err < 1e-4, "logistic rel err {err}");

        let mlp_hp = Hyperparams::Mlp {
            hidden_width: 4,
            learning_rate: 0.1,
            epochs: 1,
            batch_size: 8,
            l2_lambda: 0.01,
        };
        let err = loss_gradient_check(ModelFamily::Mlp, &x, &y, &mlp_hp, 1e-5, 0).unwrap();
        assert!(err < 1e-4, "mlp rel err {err}");
    }

    #[test]
    fn gradient_check_rejects_empty_data() {
        let (x, _) = random_problem(5, 2, 9);
        let empty = x.subset_rows(&[]);
        let hp = Hyperparams::Logistic {
            l2_lambda: 0.0,
            max_iter: 10,
            tol: 1e-6,
        };
        assert!(loss_gradient_check(ModelFamily::Logistic, &empty, &[], &hp, 1e-5, 0).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = random_problem(30, 3, 10);
        let hp = &default_grid(ModelFamily::GradBoost)[0];
        let model = fit(hp, &x, &y, 11).unwrap();
        let json = model.to_json().unwrap();
        let back = TrainedModel::from_json(&json).unwrap();
        assert_eq!(model, back);
        let probs_a = model.predict_proba(&x).unwrap();
        let probs_b = back.predict_proba(&x).unwrap();
        assert_eq!(probs_a, probs_b);
    }

    #[test]
    fn hyperparam_invariants_are_enforced() {
        assert!(Hyperparams::Logistic {
            l2_lambda: -1.0,
            max_iter: 10,
            tol: 1e-6
        }
        .validate()
        .is_err());
        assert!(Hyperparams::GradBoost {
            n_rounds: 0,
            learning_rate: 0.1,
            max_depth: 3,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_hessian: 1.0
        }
        .validate()
        .is_err());
        assert!(Hyperparams::Mlp {
            hidden_width: 8,
            learning_rate: 0.0,
            epochs: 5,
            batch_size: 4,
            l2_lambda: 0.0
        }
        .validate()
        .is_err());
    }
}
