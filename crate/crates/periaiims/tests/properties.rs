//! Property tests over the pure kernels: rank metrics, banding, encoding
//! partitions, percentile intervals, and the PSD repair.

mod common;

use periaiims::data::{
    default_registry, Cohort, DatasetVariant, RawOutcomes, Row, SurgeryFilter, Value, VariantKind,
};
use periaiims::eval::{auroc, bootstrap_ci, compute_metrics};
use periaiims::ingest::encode;
use periaiims::netcorr::{categorize, BandStrength};
use periaiims::synth::repair_psd;
use proptest::prelude::*;

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..1.0, n),
            proptest::collection::vec(0u8..2, n),
        )
            .prop_map(|(s, mut y)| {
                y[0] = 1;
                y[1] = 0;
                (s, y)
            })
    })
}

proptest! {
    #[test]
    fn auroc_is_invariant_under_strictly_monotone_transforms(
        (scores, labels) in scores_and_labels(),
        scale in 0.1f64..20.0,
        shift in -5.0f64..5.0,
    ) {
        let base = auroc(&scores, &labels).unwrap();
        // Affine with positive slope, then an odd cubic: both strictly
        // monotone.
        let affine: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
        let cubic: Vec<f64> = scores.iter().map(|s| s.powi(3) + s).collect();
        prop_assert_eq!(base, auroc(&affine, &labels).unwrap());
        prop_assert_eq!(base, auroc(&cubic, &labels).unwrap());
    }

    #[test]
    fn metrics_stay_in_unit_interval((scores, labels) in scores_and_labels()) {
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        for name in ["accuracy", "f1", "precision", "sensitivity", "specificity"] {
            let v = m.get(name).unwrap();
            prop_assert!((0.0..=1.0).contains(&v), "{} = {}", name, v);
        }
        if let Some(a) = m.auroc {
            prop_assert!((0.0..=1.0).contains(&a));
        }
        if let Some(ap) = m.average_precision {
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }

    #[test]
    fn bootstrap_bounds_are_ordered((scores, labels) in scores_and_labels(), seed in 0u64..1000) {
        let ci = bootstrap_ci(&scores, &labels, 50, seed).unwrap();
        for name in ["accuracy", "f1", "precision", "sensitivity", "specificity"] {
            let e = ci.entry(name).unwrap();
            prop_assert!(e.lo95 <= e.hi95);
        }
    }

    #[test]
    fn banding_is_total_odd_and_monotone(r in -1.0f64..=1.0, delta in 0.0f64..0.5) {
        let band = categorize(r);
        let mirrored = categorize(-r);
        prop_assert_eq!(band.strength, mirrored.strength);

        let rank = |s: BandStrength| match s {
            BandStrength::Negligible => 0,
            BandStrength::Low => 1,
            BandStrength::Moderate => 2,
            BandStrength::High => 3,
        };
        let stronger = (r.abs() + delta).min(1.0);
        prop_assert!(rank(categorize(stronger).strength) >= rank(band.strength));
    }

    #[test]
    fn one_hot_blocks_partition(
        levels in proptest::collection::vec(0usize..4, 6..30),
        unseen in 0usize..8,
    ) {
        // Rows carry one categorical feature ("sex") with synthetic levels;
        // every observed training level yields exactly one hot column.
        let registry = default_registry();
        let sex_idx = registry.index_of("sex").unwrap();
        let make_cohort = |lv: &[usize]| {
            let rows: Vec<Row> = lv
                .iter()
                .map(|&l| {
                    let mut values: Vec<Option<Value>> = registry
                        .specs
                        .iter()
                        .map(|s| match s.kind {
                            periaiims::data::FeatureKind::Numeric => Some(Value::Num(0.5)),
                            periaiims::data::FeatureKind::Binary => Some(Value::Num(0.0)),
                            periaiims::data::FeatureKind::Categorical => {
                                Some(Value::Cat("base".to_string()))
                            }
                        })
                        .collect();
                    values[sex_idx] = Some(Value::Cat(format!("L{l}")));
                    Row {
                        values,
                        surgery: "urology".to_string(),
                        outcomes: RawOutcomes::default(),
                    }
                })
                .collect();
            Cohort::new(registry.clone(), rows).unwrap()
        };
        let train = make_cohort(&levels);
        let mut apply_levels = levels.clone();
        apply_levels[0] = 4 + unseen; // possibly unseen at train time
        let apply = make_cohort(&apply_levels);

        let variant = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let pair = encode(&train, &apply, &variant).unwrap();
        let block: Vec<usize> = pair
            .train
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name().starts_with("sex="))
            .map(|(i, _)| i)
            .collect();

        for r in 0..pair.train.n_rows() {
            let total: f64 = block.iter().map(|&c| pair.train.get(r, c)).sum();
            prop_assert_eq!(total, 1.0);
        }
        for r in 0..pair.applied.n_rows() {
            let total: f64 = block.iter().map(|&c| pair.applied.get(r, c)).sum();
            prop_assert!(total == 0.0 || total == 1.0);
            let seen = levels.contains(&apply_levels[r]);
            prop_assert_eq!(total == 1.0, seen);
        }
    }

    #[test]
    fn psd_repair_yields_unit_diagonal_psd(entries in proptest::collection::vec(-0.95f64..0.95, 28)) {
        // An arbitrary symmetric unit-diagonal 8x8 matrix, often indefinite.
        let mut m = vec![vec![0.0; 8]; 8];
        let mut k = 0;
        for i in 0..8 {
            m[i][i] = 1.0;
            for j in 0..i {
                m[i][j] = entries[k];
                m[j][i] = entries[k];
                k += 1;
            }
        }
        let (repaired, _passes) = repair_psd(&m).unwrap();
        for i in 0..8 {
            prop_assert!((repaired[i][i] - 1.0).abs() < 1e-9);
            for j in 0..8 {
                prop_assert!((repaired[i][j] - repaired[j][i]).abs() < 1e-12);
                prop_assert!(repaired[i][j].abs() <= 1.0 + 1e-9);
            }
        }
    }
}
