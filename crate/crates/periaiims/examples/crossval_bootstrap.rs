//! Hyperparameter search inside stratified 5-fold cross-validation, then
//! hold-out evaluation with 100-replicate bootstrap confidence intervals.
//!
//! ```bash
//! cargo run --example crossval_bootstrap
//! ```

use periaiims::data::{OutcomeKind, VariantKind};
use periaiims::eval::fit_cost_estimate;
use periaiims::eval::{bootstrap_ci, grid_search, select_best, stratified_kfold, Candidate};
use periaiims::models::{default_grid, fit, ModelFamily};
use periaiims::pipeline::{acquire_cohort, prepare_variant, RunConfig};

fn main() -> periaiims::Result<()> {
    let config = RunConfig::synthetic(2_000, 21, "target/example_out".into());
    let (cohort, _) = acquire_cohort(&config, "urology")?;
    let prepared = prepare_variant(
        &cohort,
        "urology",
        VariantKind::PeriOp,
        OutcomeKind::Charges,
        0.2,
        9,
    )?;
    let x_train = prepared.x.subset_rows(&prepared.train_idx);
    let y_train: Vec<u8> = prepared
        .train_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();
    let x_test = prepared.x.subset_rows(&prepared.test_idx);
    let y_test: Vec<u8> = prepared
        .test_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();

    let plan = stratified_kfold(&y_train, 5, 17)?;
    let mut candidates = Vec::new();
    println!("family           best grid point (mean validation AUROC)");
    for family in [
        ModelFamily::Logistic,
        ModelFamily::GradBoost,
        ModelFamily::Tree,
    ] {
        let grid = default_grid(family);
        let (best_hp, points) = grid_search(&grid, &x_train, &y_train, &plan, 3)?;
        let best_auc = points
            .iter()
            .filter_map(|p| p.mean_auroc)
            .fold(f64::NEG_INFINITY, f64::max);
        println!("{:<16} {:.4}", family.name(), best_auc);

        let model = fit(&best_hp, &x_train, &y_train, 5)?;
        let scores = model.predict_proba(&x_test)?;
        let metrics = bootstrap_ci(&scores, &y_test, 100, 23)?;
        candidates.push(Candidate {
            family,
            variant: VariantKind::PeriOp,
            hp: best_hp.clone(),
            metrics,
            fit_cost: fit_cost_estimate(&best_hp, x_train.n_rows(), x_train.n_cols()),
        });
    }

    let selection = select_best(&candidates)?;
    let winner = &selection.winner;
    println!("\nselected: {}", winner.family.name());
    for name in [
        "auroc",
        "accuracy",
        "f1",
        "precision",
        "sensitivity",
        "specificity",
    ] {
        if let Some(e) = winner.metrics.entry(name) {
            println!(
                "  {:<12} {:.3} ({:.3} - {:.3})",
                name, e.point, e.lo95, e.hi95
            );
        }
    }
    println!(
        "  ({} of 100 resamples were single-class and skipped rank metrics)",
        winner.metrics.skipped_rank_resamples
    );
    Ok(())
}
