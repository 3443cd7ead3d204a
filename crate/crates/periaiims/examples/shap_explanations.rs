//! Shapley attributions for a boosted model: exact path-dependent values,
//! local-accuracy verification, top-10 ranking with directionality, and
//! the beeswarm SVG.
//!
//! ```bash
//! cargo run --example shap_explanations
//! ```

use periaiims::data::{OutcomeKind, VariantKind};
use periaiims::explain::{background_sample, explain_model, rank_impacts};
use periaiims::models::{fit, Hyperparams};
use periaiims::pipeline::{acquire_cohort, prepare_variant, RunConfig};
use periaiims::svg::beeswarm_svg;

fn main() -> periaiims::Result<()> {
    let config = RunConfig::synthetic(3_000, 5, "target/example_out".into());
    let (cohort, _) = acquire_cohort(&config, "all_surgeries")?;
    let prepared = prepare_variant(
        &cohort,
        "all_surgeries",
        VariantKind::PeriOpCognitive,
        OutcomeKind::Los,
        0.2,
        31,
    )?;
    let x_train = prepared.x.subset_rows(&prepared.train_idx);
    let y_train: Vec<u8> = prepared
        .train_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();
    let x_test = prepared.x.subset_rows(&prepared.test_idx);

    let hp = Hyperparams::GradBoost {
        n_rounds: 60,
        learning_rate: 0.2,
        max_depth: 3,
        l2_lambda: 1.0,
        gamma_min_gain: 0.0,
        min_child_hessian: 1.0,
    };
    let model = fit(&hp, &x_train, &y_train, 7)?;

    let x_explain = background_sample(&x_test, 300, 1);
    let background = background_sample(&x_train, 300, 2);
    let shap = explain_model(&model, &x_explain, &background, 128, 3)?;

    // Local accuracy: attributions plus base reconstruct the margin.
    let margins = model.predict_margin(&x_explain)?;
    let worst = (0..shap.n_rows())
        .map(|i| (shap.reconstructed(i) - margins[i]).abs())
        .fold(0.0_f64, f64::max);
    println!(
        "attributions over {} rows in {:?} space; worst additivity error {:.2e}",
        shap.n_rows(),
        shap.output_space,
        worst
    );

    println!("\ntop 10 features by mean |phi|:");
    let impacts = rank_impacts(&shap, &x_explain, 10);
    for imp in &impacts {
        println!(
            "  {:<26} mean|phi| {:.4}  directionality {:+.2}",
            imp.name, imp.mean_abs_phi, imp.directionality
        );
    }

    let out = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(out).ok();
    let svg = beeswarm_svg(
        &shap,
        &x_explain,
        &impacts,
        "all_surgeries / los / grad_boost",
    );
    std::fs::write(out.join("shap_beeswarm.svg"), svg).expect("write svg");
    shap.write_csv(&out.join("shap.csv"))?;
    println!("\nwrote {}", out.join("shap_beeswarm.svg").display());
    Ok(())
}
