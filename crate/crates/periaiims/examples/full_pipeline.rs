//! Run the whole pipeline over a small configuration and render the
//! Markdown report.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```
//!
//! Equivalent to `periaiims run-all` followed by `periaiims report` with a
//! reduced cell grid; the report bundle lands in `target/example_out/run`.

use periaiims::data::OutcomeKind;
use periaiims::models::ModelFamily;
use periaiims::pipeline::{render_report, run_all, RunConfig};

fn main() -> periaiims::Result<()> {
    let mut config = RunConfig::synthetic(1_200, 3, "target/example_out/run".into());
    config.surgeries = vec!["all_surgeries".into(), "orthopedics".into()];
    config.outcomes = vec![
        OutcomeKind::Los,
        OutcomeKind::Charges,
        OutcomeKind::Mortality1y,
    ];
    config.families = vec![
        ModelFamily::Logistic,
        ModelFamily::NaiveBayes,
        ModelFamily::GradBoost,
    ];

    let summary = run_all(&config)?;
    for cell in &summary.cells {
        let status = if cell.skipped.is_some() {
            "skipped".to_string()
        } else if let Some(best) = &cell.best {
            format!(
                "{} on {} (AUROC {:.3})",
                best.family.name(),
                best.variant.name(),
                best.metrics.auroc.unwrap().point
            )
        } else {
            "failed".to_string()
        };
        println!("{:<16} {:<12} {status}", cell.surgery, cell.outcome.name());
    }

    let report = render_report(&config.out_dir)?;
    std::fs::write(config.out_dir.join("report.md"), &report).expect("write report");
    println!(
        "\nbundle: {} (metrics.csv, variant_winners.csv, disruptions.json, cells/, report.md)",
        config.out_dir.display()
    );
    Ok(())
}
