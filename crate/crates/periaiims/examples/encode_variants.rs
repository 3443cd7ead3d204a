//! Encode a cohort under the three nested dataset variants.
//!
//! ```bash
//! cargo run --example encode_variants
//! ```
//!
//! Shows min-max scaling fitted on the training rows only, one-hot level
//! blocks with full provenance, the surgery-type block that appears only
//! when all surgeries are pooled, and apply-time clipping.

use periaiims::data::{DatasetVariant, OutcomeKind, SurgeryFilter, VariantKind};
use periaiims::ingest::{encode, filter_complete};
use periaiims::synth::{default_profile, sample_cohort};

fn main() -> periaiims::Result<()> {
    let profile = default_profile(SurgeryFilter::AllSurgeries, 400, 7)?;
    let cohort = sample_cohort(&profile)?;

    for kind in VariantKind::ALL {
        let variant = DatasetVariant::new(kind, SurgeryFilter::AllSurgeries);
        let (complete, _) = filter_complete(&cohort, &variant, OutcomeKind::Los);
        let pair = encode(&complete, &complete, &variant)?;
        println!(
            "{:<18} {} columns (first: {}, last: {})",
            kind.name(),
            pair.train.n_cols(),
            pair.train.columns[0].name(),
            pair.train.columns.last().unwrap().name()
        );
    }

    // Surgery one-hots vanish for a single-surgery cohort.
    let uro_profile = default_profile(SurgeryFilter::Only("urology".into()), 400, 7)?;
    let uro = sample_cohort(&uro_profile)?;
    let variant = DatasetVariant::new(VariantKind::IntraOp, SurgeryFilter::Only("urology".into()));
    let (complete, _) = filter_complete(&uro, &variant, OutcomeKind::Los);
    let pair = encode(&complete, &complete, &variant)?;
    println!(
        "\nurology intra_op: {} columns (no surgery block)",
        pair.train.n_cols()
    );

    // Scaled training columns land in [0, 1]; apply-time values clip there.
    let age = pair.train.column_index("age");
    if let Some(col) = age {
        let vals = pair.train.column_values(col);
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        println!("age column range after scaling: [{lo:.3}, {hi:.3}]");
    }

    let out = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(out).ok();
    pair.train.write_csv_with_manifest(
        &out.join("urology_intraop.csv"),
        &out.join("urology_intraop.columns.json"),
    )?;
    println!("wrote matrix + provenance manifest under {}", out.display());
    Ok(())
}
