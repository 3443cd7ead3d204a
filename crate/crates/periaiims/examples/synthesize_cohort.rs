//! Generate a calibrated synthetic cohort and inspect its ground truth.
//!
//! ```bash
//! cargo run --example synthesize_cohort
//! ```
//!
//! The profile pins demographic marginals, an intraoperative correlation
//! structure imposed through a Gaussian copula, and a planted logistic
//! mechanism per outcome. Because the mechanism is known, the profile can
//! report the Bayes-optimal AUROC every learned model is bounded by.

use periaiims::data::{OutcomeKind, SurgeryFilter};
use periaiims::ingest::{binarize_outcome, write_cohort_csv};
use periaiims::synth::{bayes_optimal_auc, default_profile, sample_cohort, write_profile_json};

fn main() -> periaiims::Result<()> {
    let profile = default_profile(SurgeryFilter::AllSurgeries, 5_000, 42)?;
    let cohort = sample_cohort(&profile)?;

    let age_idx = cohort.registry.index_of("age").unwrap();
    let mean_age: f64 = cohort
        .rows
        .iter()
        .filter_map(|r| r.values[age_idx].as_ref().and_then(|v| v.as_num()))
        .sum::<f64>()
        / cohort.n_rows() as f64;
    println!(
        "sampled {} rows; mean age {:.2} (target {:.2})",
        cohort.n_rows(),
        mean_age,
        profile.age.mean()
    );

    println!("\noutcome          prevalence  target   bayes-optimal AUROC");
    for outcome in OutcomeKind::ALL {
        let labels = binarize_outcome(&cohort, outcome)?;
        let prevalence = labels.n_pos() as f64 / labels.y.len() as f64;
        let target = profile.mechanism(outcome).unwrap().target_prevalence;
        let ceiling = bayes_optimal_auc(&profile, outcome, 20_000)?;
        println!(
            "{:<16} {:.3}       {:.3}    {:.3}",
            outcome.name(),
            prevalence,
            target,
            ceiling
        );
    }

    let out = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(out).ok();
    write_cohort_csv(&cohort, &out.join("all_surgeries.csv"))?;
    write_profile_json(&profile, &out.join("all_surgeries.profile.json"))?;
    println!("\nwrote {}", out.join("all_surgeries.csv").display());
    Ok(())
}
