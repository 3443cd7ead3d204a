//! Fit all seven classifier families on one synthetic task and compare
//! hold-out AUROC against the Bayes-optimal ceiling.
//!
//! ```bash
//! cargo run --example train_model_zoo
//! ```

use periaiims::data::{OutcomeKind, VariantKind};
use periaiims::eval::auroc;
use periaiims::models::{default_grid, fit, ModelFamily};
use periaiims::pipeline::{prepare_variant, RunConfig};
use periaiims::synth::bayes_optimal_auc;

fn main() -> periaiims::Result<()> {
    let config = RunConfig::synthetic(3_000, 11, "target/example_out".into());
    let (cohort, profile) = periaiims::pipeline::acquire_cohort(&config, "all_surgeries")?;
    let profile = profile.expect("synthetic source");
    let ceiling = bayes_optimal_auc(&profile, OutcomeKind::Los, 20_000)?;

    let prepared = prepare_variant(
        &cohort,
        "all_surgeries",
        VariantKind::PeriOpCognitive,
        OutcomeKind::Los,
        0.2,
        3,
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

    println!(
        "{} train rows, {} test rows, {} columns; Bayes ceiling {:.3}\n",
        x_train.n_rows(),
        x_test.n_rows(),
        x_train.n_cols(),
        ceiling
    );
    println!("{:<16} {:>10}", "family", "test AUROC");
    for family in ModelFamily::ALL {
        let hp = &default_grid(family)[0];
        let model = fit(hp, &x_train, &y_train, 5)?;
        let scores = model.predict_proba(&x_test)?;
        let auc = auroc(&scores, &y_test).unwrap_or(f64::NAN);
        println!("{:<16} {:>10.3}", family.name(), auc);
    }
    Ok(())
}
