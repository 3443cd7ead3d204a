//! Synthetic cohort generation with planted ground truth.
//!
//! Cohorts are sampled through a Gaussian copula: an 8-dimensional correlated
//! standard-normal block drives the intraoperative numerics through marginal
//! quantile maps, remaining features are drawn independently from their
//! marginals, and outcome labels follow a planted linear-logistic mechanism
//! (optionally with an anti-aligned blood-pressure disruption term). Every
//! draw derives from a per-row counter-based substream of the profile seed,
//! so output is independent of row-block parallelism.
//!
//! Demographic marginals and outcome class balances default to the published
//! cohort summaries; the intraoperative dose and duration marginals are
//! stylized constants stored explicitly in the profile and carry no claim of
//! fidelity. Tests must assert against the profile, never against unpublished
//! source values.

use crate::data::{
    default_registry, Cohort, MortalityRecord, OutcomeKind, RawOutcomes, Row, SurgeryFilter, Value,
    CLOCK_LATENT_DIMS, COMORBIDITIES, INTRAOP_NUMERICS, SURGERY_TYPES,
};
use crate::error::{Error, Result};
use crate::eval::auroc;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Stream offsets keep cohort rows, oracle rows, and intercept calibration
/// on disjoint substreams of the same seed.
const COHORT_STREAM_BASE: u64 = 0;
const ORACLE_STREAM_BASE: u64 = 1 << 48;
const CALIBRATION_STREAM_BASE: u64 = 1 << 49;

/// Number of Monte-Carlo rows used to solve mechanism intercepts.
const CALIBRATION_ROWS: usize = 4096;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Marginal distribution of one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NumericMarginal {
    /// Normal(mean, sd) truncated to [lo, hi].
    TruncNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    /// exp(Normal(log_median, log_sd)).
    LogNormal { log_median: f64, log_sd: f64 },
}

impl NumericMarginal {
    pub fn trunc(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        NumericMarginal::TruncNormal { mean, sd, lo, hi }
    }

    pub fn log_med(median: f64, log_sd: f64) -> Self {
        NumericMarginal::LogNormal {
            log_median: median.ln(),
            log_sd,
        }
    }

    /// Quantile transform of a standard-normal draw.
    pub fn from_z(&self, z: f64) -> f64 {
        match *self {
            NumericMarginal::TruncNormal { mean, sd, lo, hi } => {
                let n = std_normal();
                let a = n.cdf((lo - mean) / sd);
                let b = n.cdf((hi - mean) / sd);
                let u = n.cdf(z);
                let q = (a + u * (b - a)).clamp(1e-12, 1.0 - 1e-12);
                (mean + sd * n.inverse_cdf(q)).clamp(lo, hi)
            }
            NumericMarginal::LogNormal { log_median, log_sd } => (log_median + log_sd * z).exp(),
        }
    }

    /// Exact mean of the marginal (accounts for truncation).
    pub fn mean(&self) -> f64 {
        match *self {
            NumericMarginal::TruncNormal { mean, sd, lo, hi } => {
                let n = std_normal();
                let a = (lo - mean) / sd;
                let b = (hi - mean) / sd;
                let z = n.cdf(b) - n.cdf(a);
                mean + sd * (pdf(a) - pdf(b)) / z
            }
            NumericMarginal::LogNormal { log_median, log_sd } => {
                (log_median + 0.5 * log_sd * log_sd).exp()
            }
        }
    }

    /// Exact standard deviation of the marginal.
    pub fn sd(&self) -> f64 {
        match *self {
            NumericMarginal::TruncNormal { mean, sd, lo, hi } => {
                let n = std_normal();
                let a = (lo - mean) / sd;
                let b = (hi - mean) / sd;
                let z = n.cdf(b) - n.cdf(a);
                let d = (pdf(a) - pdf(b)) / z;
                let var = sd * sd * (1.0 + (a * pdf(a) - b * pdf(b)) / z - d * d);
                var.max(0.0).sqrt()
            }
            NumericMarginal::LogNormal { log_median, log_sd } => {
                let s2 = log_sd * log_sd;
                let mean = (log_median + 0.5 * s2).exp();
                (mean * mean * (s2.exp() - 1.0)).max(0.0).sqrt()
            }
        }
    }

    /// Reference range used to put mechanism coefficients on a common
    /// [0, 1] scale.
    pub fn ref_range(&self) -> (f64, f64) {
        match *self {
            NumericMarginal::TruncNormal { mean, sd, lo, hi } => {
                (lo.max(mean - 3.0 * sd), hi.min(mean + 3.0 * sd))
            }
            NumericMarginal::LogNormal { log_median, log_sd } => {
                (0.0, (log_median + 2.0 * log_sd).exp())
            }
        }
    }
}

fn pdf(x: f64) -> f64 {
    (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Marginal of a categorical feature: levels with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMarginal {
    pub levels: Vec<(String, f64)>,
}

impl CategoricalMarginal {
    fn new(levels: &[(&str, f64)]) -> Self {
        CategoricalMarginal {
            levels: levels.iter().map(|(s, p)| (s.to_string(), *p)).collect(),
        }
    }

    fn sample(&self, u: f64) -> &str {
        let mut acc = 0.0;
        for (level, p) in &self.levels {
            acc += p;
            if u < acc {
                return level;
            }
        }
        &self.levels.last().unwrap().0
    }
}

/// Linear risk term planted on the logit scale: +beta * raised - beta * lowered,
/// anti-aligned with the baseline positive correlation between the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionTerm {
    pub raised: String,
    pub lowered: String,
    pub beta: f64,
}

impl DisruptionTerm {
    /// The default planted disruption: risk rises with blood-pressure
    /// variability and falls with its mean.
    pub fn default_pressure() -> Self {
        DisruptionTerm {
            raised: "sd_nibp".to_string(),
            lowered: "avg_nibp".to_string(),
            beta: 1.5,
        }
    }
}

/// Planted logistic mechanism for one outcome. Coefficients apply to
/// features scaled into [0, 1] by the profile's reference ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMechanism {
    pub outcome: OutcomeKind,
    pub intercept: f64,
    pub target_prevalence: f64,
    pub coefficients: Vec<(String, f64)>,
    pub disruption: Option<DisruptionTerm>,
}

/// Everything needed to sample a cohort deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenProfile {
    pub surgery: SurgeryFilter,
    pub n: usize,
    pub seed: u64,
    /// Mixing proportions over surgery labels (single entry when filtered).
    pub surgery_mix: Vec<(String, f64)>,
    /// Marginals of the eight intraoperative numerics, in canonical order.
    pub intraop_marginals: Vec<NumericMarginal>,
    /// Correlation targets over the intraoperative numerics, stored after
    /// nearest-PSD repair.
    pub corr_targets: Vec<Vec<f64>>,
    pub age: NumericMarginal,
    pub education_years: NumericMarginal,
    pub adi: NumericMarginal,
    pub frailty: NumericMarginal,
    pub sex: CategoricalMarginal,
    pub race: CategoricalMarginal,
    pub ethnicity: CategoricalMarginal,
    /// Probabilities of ASA grades 1..=5.
    pub asa_probs: [f64; 5],
    /// Prevalence of each comorbidity flag, in canonical order.
    pub comorbidity_prevalence: [f64; 6],
    pub outcome_mechanisms: Vec<OutcomeMechanism>,
}

/// Demographic summary for one surgery group: (mean, sd) pairs, splits in
/// percent, ASA grade percentages, and comorbidity percentages.
struct DemographicDefaults {
    age: (f64, f64),
    sex_male_pct: f64,
    race_white_black_pct: (f64, f64),
    ethnicity_nonhisp_hisp_pct: (f64, f64),
    adi: (f64, f64),
    education: (f64, f64),
    asa_pct: [f64; 5],
    frailty: (f64, f64),
    comorbidity_pct: [f64; 6],
    weight: f64,
}

fn demographic_defaults(surgery: &SurgeryFilter) -> DemographicDefaults {
    // Comorbidity order: sleep apnea, diabetes, hyperlipidemia,
    // hypertension, movement disorder, cognitive disorder.
    match surgery.name() {
        "all_surgeries" => DemographicDefaults {
            age: (73.3, 6.0),
            sex_male_pct: 50.3,
            race_white_black_pct: (87.0, 7.3),
            ethnicity_nonhisp_hisp_pct: (95.7, 2.0),
            adi: (60.2, 23.0),
            education: (13.9, 2.9),
            asa_pct: [0.1, 11.5, 79.5, 8.9, 0.01],
            frailty: (1.2, 1.3),
            comorbidity_pct: [16.0, 29.4, 54.4, 55.1, 5.8, 0.9],
            weight: 6221.0,
        },
        "orthopedics" => DemographicDefaults {
            age: (72.0, 5.6),
            sex_male_pct: 44.3,
            race_white_black_pct: (86.6, 6.0),
            ethnicity_nonhisp_hisp_pct: (93.8, 1.5),
            adi: (59.1, 23.0),
            education: (14.4, 3.1),
            asa_pct: [0.0, 17.5, 80.2, 2.3, 0.0],
            frailty: (1.4, 1.3),
            comorbidity_pct: [16.5, 23.8, 57.2, 59.9, 4.6, 0.9],
            weight: 916.0,
        },
        "neurosurgery" => DemographicDefaults {
            age: (73.0, 5.3),
            sex_male_pct: 55.1,
            race_white_black_pct: (93.3, 2.7),
            ethnicity_nonhisp_hisp_pct: (97.2, 2.0),
            adi: (54.7, 24.1),
            education: (14.3, 2.8),
            asa_pct: [0.4, 10.7, 86.7, 2.2, 0.0],
            frailty: (1.2, 1.4),
            comorbidity_pct: [15.5, 25.6, 52.0, 55.1, 27.5, 1.1],
            weight: 542.0,
        },
        "cardiovascular" => DemographicDefaults {
            age: (73.9, 6.1),
            sex_male_pct: 49.9,
            race_white_black_pct: (86.9, 8.2),
            ethnicity_nonhisp_hisp_pct: (94.3, 2.8),
            adi: (60.9, 21.9),
            education: (13.4, 2.7),
            asa_pct: [0.0, 1.5, 70.5, 28.0, 0.0],
            frailty: (1.3, 1.4),
            comorbidity_pct: [12.1, 33.8, 64.4, 41.4, 2.1, 0.4],
            weight: 461.0,
        },
        "urology" => DemographicDefaults {
            age: (74.1, 6.2),
            sex_male_pct: 71.0,
            race_white_black_pct: (87.5, 6.7),
            ethnicity_nonhisp_hisp_pct: (97.3, 2.0),
            adi: (61.0, 22.7),
            education: (14.2, 3.1),
            asa_pct: [0.0, 13.1, 84.2, 2.7, 0.0],
            frailty: (1.0, 1.3),
            comorbidity_pct: [13.8, 28.5, 43.9, 54.3, 3.7, 0.9],
            weight: 639.0,
        },
        "gynecology" => DemographicDefaults {
            age: (72.5, 5.7),
            sex_male_pct: 0.0,
            race_white_black_pct: (88.7, 7.4),
            ethnicity_nonhisp_hisp_pct: (98.0, 1.9),
            adi: (62.5, 21.9),
            education: (13.8, 2.4),
            asa_pct: [0.5, 25.1, 71.9, 2.5, 0.0],
            frailty: (1.1, 1.2),
            comorbidity_pct: [8.4, 20.7, 43.3, 52.7, 1.9, 0.5],
            weight: 203.0,
        },
        "otolaryngology" => DemographicDefaults {
            age: (73.9, 6.3),
            sex_male_pct: 54.9,
            race_white_black_pct: (88.3, 5.3),
            ethnicity_nonhisp_hisp_pct: (96.2, 1.8),
            adi: (58.7, 22.3),
            education: (13.8, 2.8),
            asa_pct: [0.0, 14.9, 80.0, 5.1, 0.0],
            frailty: (1.0, 1.3),
            comorbidity_pct: [16.2, 29.6, 40.7, 57.9, 3.0, 1.0],
            weight: 395.0,
        },
        other => unreachable!("unknown surgery {other}"),
    }
}

/// Class counts (n0, n1) backing the default planted prevalences.
fn outcome_class_counts(surgery: &SurgeryFilter, outcome: OutcomeKind) -> (u32, u32) {
    use OutcomeKind::*;
    match (surgery.name(), outcome) {
        ("all_surgeries", Los) => (3053, 1908),
        ("all_surgeries", Charges) => (2341, 2605),
        ("all_surgeries", AvgPain) => (2309, 3084),
        ("all_surgeries", Mortality1y) => (4740, 226),
        ("orthopedics", Los) => (207, 662),
        ("orthopedics", Charges) => (82, 787),
        ("orthopedics", AvgPain) => (156, 752),
        ("neurosurgery", Los) => (430, 693),
        ("neurosurgery", Charges) => (90, 411),
        ("neurosurgery", AvgPain) => (328, 795),
        ("cardiovascular", Los) => (192, 260),
        ("cardiovascular", Charges) => (93, 359),
        ("cardiovascular", AvgPain) => (307, 521),
        ("urology", Los) => (383, 148),
        ("urology", Charges) => (295, 236),
        ("urology", AvgPain) => (294, 237),
        ("gynecology", Los) => (123, 50),
        ("gynecology", Charges) => (254, 128),
        ("gynecology", AvgPain) => (167, 33),
        ("otolaryngology", Los) => (228, 111),
        ("otolaryngology", Charges) => (243, 137),
        ("otolaryngology", AvgPain) => (580, 238),
        // Mortality for individual surgeries is never modeled downstream;
        // a nominal rare-event balance keeps the profile well-formed.
        (_, Mortality1y) => (4800, 200),
        (name, _) => unreachable!("no class counts for {name}"),
    }
}

/// Stylized intraoperative marginals (doses, durations, pressures). These
/// are plausible constants, not published values.
fn intraop_marginal_defaults() -> Vec<NumericMarginal> {
    vec![
        NumericMarginal::log_med(150.0, 0.5),            // duration_min
        NumericMarginal::log_med(140.0, 0.6),            // propofol_mg
        NumericMarginal::log_med(20.0, 0.9),             // oral_mme_mg
        NumericMarginal::trunc(0.9, 0.3, 0.0, 2.5),      // iso_sev_mac
        NumericMarginal::trunc(92.0, 11.0, 50.0, 150.0), // avg_nibp
        NumericMarginal::log_med(13.0, 0.45),            // sd_nibp
        NumericMarginal::log_med(400.0, 1.0),            // phenylephrine_mcg
        NumericMarginal::log_med(10.0, 0.8),             // ephedrine_mg
    ]
}

/// In-band correlation constants: high 0.6, moderate 0.4, low 0.2, signed.
fn corr_target_defaults(surgery: &SurgeryFilter) -> Vec<Vec<f64>> {
    let idx = |name: &str| INTRAOP_NUMERICS.iter().position(|n| *n == name).unwrap();
    let duration = idx("duration_min");
    let propofol = idx("propofol_mg");
    let mme = idx("oral_mme_mg");
    let mac = idx("iso_sev_mac");
    let avg = idx("avg_nibp");
    let sd = idx("sd_nibp");
    let phenyl = idx("phenylephrine_mcg");
    let ephedrine = idx("ephedrine_mg");

    let mut m = vec![vec![0.0; 8]; 8];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut set = |i: usize, j: usize, r: f64| {
        m[i][j] = r;
        m[j][i] = r;
    };

    let name = surgery.name().to_string();
    let high_duration_mme = matches!(
        name.as_str(),
        "all_surgeries" | "cardiovascular" | "urology" | "gynecology"
    );
    set(duration, mme, if high_duration_mme { 0.6 } else { 0.4 });
    set(duration, mac, 0.4);
    set(mme, mac, 0.2);
    set(phenyl, avg, 0.6);
    set(phenyl, sd, 0.6);
    let low_avg_sd = matches!(name.as_str(), "all_surgeries" | "cardiovascular");
    set(avg, sd, if low_avg_sd { 0.2 } else { 0.4 });
    if matches!(name.as_str(), "gynecology" | "otolaryngology") {
        set(ephedrine, avg, -0.4);
    }
    if matches!(
        name.as_str(),
        "orthopedics" | "urology" | "gynecology" | "otolaryngology"
    ) {
        set(mac, propofol, -0.4);
    }
    set(
        phenyl,
        ephedrine,
        if name == "gynecology" { -0.4 } else { -0.2 },
    );
    m
}

/// Default planted mechanisms. Coefficient scale is tuned so the LOS task
/// has a Bayes-optimal AUROC near 0.90 under the default marginals.
fn mechanism_defaults(
    surgery: &SurgeryFilter,
) -> Vec<(
    OutcomeKind,
    Vec<(&'static str, f64)>,
    Option<DisruptionTerm>,
)> {
    let _ = surgery;
    vec![
        (
            OutcomeKind::Los,
            vec![
                ("duration_min", 8.6),
                ("iso_sev_mac", 3.6),
                ("oral_mme_mg", 2.4),
                ("age", 2.4),
                ("frailty", 2.4),
                ("asa", 1.8),
                ("clock_size", 1.8),
                ("hypertension", 0.9),
            ],
            Some(DisruptionTerm::default_pressure()),
        ),
        (
            OutcomeKind::Charges,
            vec![
                ("duration_min", 19.0),
                ("iso_sev_mac", 4.2),
                ("phenylephrine_mcg", 2.5),
                ("asa", 2.1),
                ("education_years", -2.1),
                ("clock_size", -1.7),
                ("hyperlipidemia", 1.7),
            ],
            None,
        ),
        (
            OutcomeKind::Mortality1y,
            vec![
                ("asa", 3.5),
                ("age", 2.8),
                ("frailty", 2.3),
                ("duration_min", 2.3),
                ("cognitive_disorder", 1.2),
                ("clock_size", 1.2),
            ],
            None,
        ),
        (
            OutcomeKind::AvgPain,
            vec![
                ("duration_min", 3.0),
                ("oral_mme_mg", 2.4),
                ("age", -2.4),
                ("frailty", 1.5),
                ("sd_nibp", 1.5),
            ],
            None,
        ),
    ]
}

/// Builds the default generation profile for one surgery scope.
pub fn default_profile(surgery: SurgeryFilter, n: usize, seed: u64) -> Result<GenProfile> {
    if let SurgeryFilter::Only(name) = &surgery {
        if !SURGERY_TYPES.contains(&name.as_str()) {
            return Err(Error::UnknownSurgery(name.clone()));
        }
    }
    let d = demographic_defaults(&surgery);

    let surgery_mix = match &surgery {
        SurgeryFilter::Only(name) => vec![(name.clone(), 1.0)],
        SurgeryFilter::AllSurgeries => {
            let weights: Vec<(String, f64)> = SURGERY_TYPES
                .iter()
                .map(|s| {
                    let w = demographic_defaults(&SurgeryFilter::Only(s.to_string())).weight;
                    (s.to_string(), w)
                })
                .collect();
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            weights.into_iter().map(|(s, w)| (s, w / total)).collect()
        }
    };

    let pct = |p: f64| p / 100.0;
    let (w, b) = d.race_white_black_pct;
    let (nh, h) = d.ethnicity_nonhisp_hisp_pct;
    let male = pct(d.sex_male_pct);
    let asa_total: f64 = d.asa_pct.iter().sum();

    let corr_raw = corr_target_defaults(&surgery);
    let (corr_targets, _) = repair_psd(&corr_raw)?;

    let mut profile = GenProfile {
        surgery,
        n,
        seed,
        surgery_mix,
        intraop_marginals: intraop_marginal_defaults(),
        corr_targets,
        age: NumericMarginal::trunc(d.age.0, d.age.1, 40.0, 100.0),
        education_years: NumericMarginal::trunc(d.education.0, d.education.1, 4.0, 24.0),
        adi: NumericMarginal::trunc(d.adi.0, d.adi.1, 1.0, 100.0),
        frailty: NumericMarginal::trunc(d.frailty.0, d.frailty.1, 0.0, 5.0),
        sex: CategoricalMarginal::new(&[("Male", male), ("Female", 1.0 - male)]),
        race: CategoricalMarginal::new(&[
            ("White", pct(w)),
            ("Black", pct(b)),
            ("Other", 1.0 - pct(w) - pct(b)),
        ]),
        ethnicity: CategoricalMarginal::new(&[
            ("NonHispanic", pct(nh)),
            ("Hispanic", pct(h)),
            ("Other", 1.0 - pct(nh) - pct(h)),
        ]),
        asa_probs: [
            d.asa_pct[0] / asa_total,
            d.asa_pct[1] / asa_total,
            d.asa_pct[2] / asa_total,
            d.asa_pct[3] / asa_total,
            d.asa_pct[4] / asa_total,
        ],
        comorbidity_prevalence: d.comorbidity_pct.map(pct),
        outcome_mechanisms: Vec::new(),
    };

    for (outcome, coefs, disruption) in mechanism_defaults(&profile.surgery) {
        let (n0, n1) = outcome_class_counts(&profile.surgery, outcome);
        let target = f64::from(n1) / f64::from(n0 + n1);
        let mut mech = OutcomeMechanism {
            outcome,
            intercept: 0.0,
            target_prevalence: target,
            coefficients: coefs.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
            disruption,
        };
        mech.intercept = solve_intercept(&profile, &mech, target);
        profile.outcome_mechanisms.push(mech);
    }

    profile.validate()?;
    Ok(profile)
}

impl GenProfile {
    pub fn mechanism(&self, outcome: OutcomeKind) -> Option<&OutcomeMechanism> {
        self.outcome_mechanisms
            .iter()
            .find(|m| m.outcome == outcome)
    }

    pub fn mechanism_mut(&mut self, outcome: OutcomeKind) -> Option<&mut OutcomeMechanism> {
        self.outcome_mechanisms
            .iter_mut()
            .find(|m| m.outcome == outcome)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("profile n must be positive".to_string()));
        }
        let k = self.corr_targets.len();
        if k != INTRAOP_NUMERICS.len() || self.intraop_marginals.len() != k {
            return Err(Error::Config(
                "profile must cover all intraoperative numerics".to_string(),
            ));
        }
        for i in 0..k {
            if (self.corr_targets[i][i] - 1.0).abs() > 1e-9 {
                return Err(Error::Config("corr_targets diagonal must be 1".to_string()));
            }
            for j in 0..k {
                if (self.corr_targets[i][j] - self.corr_targets[j][i]).abs() > 1e-12 {
                    return Err(Error::Config("corr_targets must be symmetric".to_string()));
                }
            }
        }
        let eig = symmetric_eigenvalues(&self.corr_targets);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::PsdRepair(min));
        }
        for mech in &self.outcome_mechanisms {
            if !(mech.target_prevalence > 0.0 && mech.target_prevalence < 1.0) {
                return Err(Error::Config(format!(
                    "mechanism {} implied prevalence must lie in (0, 1)",
                    mech.outcome.name()
                )));
            }
        }
        Ok(())
    }

    /// Reference [0, 1] scaling bounds for a mechanism feature.
    fn ref_range(&self, name: &str) -> (f64, f64) {
        if let Some(i) = INTRAOP_NUMERICS.iter().position(|n| *n == name) {
            return self.intraop_marginals[i].ref_range();
        }
        match name {
            "age" => self.age.ref_range(),
            "education_years" => self.education_years.ref_range(),
            "adi" => self.adi.ref_range(),
            "frailty" => self.frailty.ref_range(),
            "asa" => (1.0, 5.0),
            _ if COMORBIDITIES.contains(&name) => (0.0, 1.0),
            // Clock latents are standard normal.
            _ => (-3.0, 3.0),
        }
    }
}

/// Nearest-PSD repair: clip negative eigenvalues to 1e-8 and renormalize
/// the diagonal to 1, iterating at most 100 passes. Returns the repaired
/// matrix and the number of passes applied (0 when already PSD).
pub fn repair_psd(m: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, usize)> {
    let k = m.len();
    let mut current: Vec<Vec<f64>> = m.to_vec();
    for pass in 0..100 {
        let eig = symmetric_eigen(&current);
        let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min >= 0.0 {
            return Ok((current, pass));
        }
        // Reconstruct with clipped spectrum, then force a unit diagonal.
        let clipped: Vec<f64> = eig
            .values
            .iter()
            .map(|&l| if l < 0.0 { 1e-8 } else { l })
            .collect();
        let mut next = vec![vec![0.0; k]; k];
        for (i, row) in next.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &l) in clipped.iter().enumerate() {
                    acc += eig.vectors[(i, t)] * l * eig.vectors[(j, t)];
                }
                *cell = acc;
            }
        }
        let diag: Vec<f64> = (0..k).map(|i| next[i][i].max(1e-12).sqrt()).collect();
        for i in 0..k {
            for j in 0..k {
                next[i][j] /= diag[i] * diag[j];
            }
            next[i][i] = 1.0;
        }
        for i in 0..k {
            for j in 0..i {
                let avg = 0.5 * (next[i][j] + next[j][i]);
                next[i][j] = avg;
                next[j][i] = avg;
            }
        }
        current = next;
    }
    let min = symmetric_eigenvalues(&current)
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min >= -1e-10 {
        Ok((current, 100))
    } else {
        Err(Error::PsdRepair(min))
    }
}

struct Eigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn symmetric_eigen(m: &[Vec<f64>]) -> Eigen {
    let k = m.len();
    let dm = DMatrix::from_fn(k, k, |i, j| m[i][j]);
    let se = dm.symmetric_eigen();
    Eigen {
        values: se.eigenvalues.iter().cloned().collect(),
        vectors: se.eigenvectors,
    }
}

fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    symmetric_eigen(m).values
}

/// Factor G with G * G^T equal to the correlation matrix: Cholesky when it
/// exists, otherwise the symmetric eigen square root.
fn correlation_factor(m: &[Vec<f64>]) -> DMatrix<f64> {
    let k = m.len();
    let dm = DMatrix::from_fn(k, k, |i, j| m[i][j]);
    if let Some(chol) = dm.clone().cholesky() {
        return chol.l();
    }
    let se = dm.symmetric_eigen();
    let sqrt = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            se.eigenvalues[i].max(0.0).sqrt()
        } else {
            0.0
        }
    });
    &se.eigenvectors * sqrt
}

fn row_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_std_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Inverse-CDF sampling keeps the draw count per feature fixed at one.
    let u: f64 = rng.gen_range(1e-12..1.0 - 1e-12);
    std_normal().inverse_cdf(u)
}

/// Feature values of one sampled row, keyed for mechanism evaluation.
struct SampledFeatures {
    intraop: [f64; 8],
    latent: [f64; 8],
    age: f64,
    sex: String,
    race: String,
    ethnicity: String,
    education_years: f64,
    adi: f64,
    asa: f64,
    frailty: f64,
    comorbidities: [f64; 6],
    clock: [f64; CLOCK_LATENT_DIMS],
    surgery: String,
}

impl SampledFeatures {
    fn numeric_by_name(&self, name: &str) -> Option<f64> {
        if let Some(i) = INTRAOP_NUMERICS.iter().position(|n| *n == name) {
            return Some(self.intraop[i]);
        }
        if let Some(i) = COMORBIDITIES.iter().position(|n| *n == name) {
            return Some(self.comorbidities[i]);
        }
        if let Some(i) = crate::data::ClockLatent::DIM_NAMES
            .iter()
            .position(|n| *n == name)
        {
            return Some(self.clock[i]);
        }
        match name {
            "age" => Some(self.age),
            "education_years" => Some(self.education_years),
            "adi" => Some(self.adi),
            "asa" => Some(self.asa),
            "frailty" => Some(self.frailty),
            _ => None,
        }
    }
}

fn sample_features(
    profile: &GenProfile,
    factor: &DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> SampledFeatures {
    // Correlated intraoperative block first, in a fixed draw order.
    let raw = DVector::from_fn(8, |_, _| draw_std_normal(rng));
    let latent_v = factor * raw;
    let mut latent = [0.0; 8];
    let mut intraop = [0.0; 8];
    for i in 0..8 {
        latent[i] = latent_v[i];
        intraop[i] = profile.intraop_marginals[i].from_z(latent[i]);
    }

    let surgery = {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = profile.surgery_mix.last().unwrap().0.as_str();
        for (label, p) in &profile.surgery_mix {
            acc += p;
            if u < acc {
                chosen = label;
                break;
            }
        }
        chosen.to_string()
    };

    let age = profile.age.from_z(draw_std_normal(rng));
    let sex = profile.sex.sample(rng.gen()).to_string();
    let race = profile.race.sample(rng.gen()).to_string();
    let ethnicity = profile.ethnicity.sample(rng.gen()).to_string();
    let education_years = profile.education_years.from_z(draw_std_normal(rng));
    let adi = profile.adi.from_z(draw_std_normal(rng));

    let asa = {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut grade = 5usize;
        for (i, p) in profile.asa_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                grade = i + 1;
                break;
            }
        }
        grade as f64
    };
    let frailty = profile.frailty.from_z(draw_std_normal(rng));

    let mut comorbidities = [0.0; 6];
    for (i, c) in comorbidities.iter_mut().enumerate() {
        let u: f64 = rng.gen();
        *c = f64::from(u < profile.comorbidity_prevalence[i]);
    }

    let mut clock = [0.0; CLOCK_LATENT_DIMS];
    for z in clock.iter_mut() {
        *z = draw_std_normal(rng);
    }

    SampledFeatures {
        intraop,
        latent,
        age,
        sex,
        race,
        ethnicity,
        education_years,
        adi,
        asa,
        frailty,
        comorbidities,
        clock,
        surgery,
    }
}

fn mechanism_logit(profile: &GenProfile, mech: &OutcomeMechanism, f: &SampledFeatures) -> f64 {
    let scaled = |name: &str| -> f64 {
        let raw = f
            .numeric_by_name(name)
            .unwrap_or_else(|| panic!("mechanism references unknown feature {name}"));
        let (lo, hi) = profile.ref_range(name);
        ((raw - lo) / (hi - lo)).clamp(0.0, 1.0)
    };
    let mut logit = mech.intercept;
    for (name, beta) in &mech.coefficients {
        logit += beta * scaled(name);
    }
    if let Some(d) = &mech.disruption {
        logit += d.beta * scaled(&d.raised) - d.beta * scaled(&d.lowered);
    }
    logit
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn solve_intercept(profile: &GenProfile, mech: &OutcomeMechanism, target: f64) -> f64 {
    // Partial scores from a fixed calibration substream, independent of the
    // user-facing cohort rows.
    let factor = correlation_factor(&profile.corr_targets);
    let mut partials = Vec::with_capacity(CALIBRATION_ROWS);
    let zeroed = OutcomeMechanism {
        intercept: 0.0,
        ..mech.clone()
    };
    for i in 0..CALIBRATION_ROWS {
        let mut rng = row_rng(profile.seed, CALIBRATION_STREAM_BASE + i as u64);
        let f = sample_features(profile, &factor, &mut rng);
        partials.push(mechanism_logit(profile, &zeroed, &f));
    }
    let prev_at = |b: f64| -> f64 {
        partials.iter().map(|s| sigmoid(s + b)).sum::<f64>() / partials.len() as f64
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if prev_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Raw outcome values consistent with the planted labels. Magnitudes are
/// arbitrary on the correct side of each binarization threshold.
fn raw_outcomes(labels: [u8; 4], rng: &mut ChaCha8Rng) -> RawOutcomes {
    let u1: f64 = rng.gen();
    let los = if labels[0] == 1 {
        25.0 + 300.0 * u1 * u1
    } else {
        4.0 + 19.0 * u1
    };

    let u2: f64 = rng.gen();
    let charges = if labels[1] == 1 {
        30_000.0 + 120_000.0 * u2 * u2
    } else {
        3_000.0 + 26_900.0 * u2
    };

    let u3: f64 = rng.gen();
    let u4: f64 = rng.gen();
    let mortality = if labels[2] == 1 {
        MortalityRecord::DiedAfterDays(10.0 + 355.0 * u3)
    } else if u4 < 0.1 {
        // A death observed past the horizon still binarizes to 0.
        MortalityRecord::DiedAfterDays(366.0 + 1000.0 * u3)
    } else {
        MortalityRecord::Survived
    };

    let u5: f64 = rng.gen();
    let pain = if labels[3] == 1 {
        (1.0 + 9.0 * u5 * u5).min(10.0)
    } else {
        0.0
    };

    RawOutcomes {
        los_hours: Some(los),
        charges_dollars: Some(charges),
        mortality: Some(mortality),
        avg_pain: Some(pain),
    }
}

fn features_to_row(f: &SampledFeatures, outcomes: RawOutcomes) -> Row {
    let mut values: Vec<Option<Value>> = Vec::with_capacity(34);
    for v in f.intraop {
        values.push(Some(Value::Num(v)));
    }
    values.push(Some(Value::Num(f.age)));
    values.push(Some(Value::Cat(f.sex.clone())));
    values.push(Some(Value::Cat(f.race.clone())));
    values.push(Some(Value::Cat(f.ethnicity.clone())));
    values.push(Some(Value::Num(f.education_years)));
    values.push(Some(Value::Num(f.adi)));
    values.push(Some(Value::Num(f.asa)));
    values.push(Some(Value::Num(f.frailty)));
    for v in f.comorbidities {
        values.push(Some(Value::Num(v)));
    }
    for v in f.clock {
        values.push(Some(Value::Num(v)));
    }
    Row {
        values,
        surgery: f.surgery.clone(),
        outcomes,
    }
}

/// Samples a cohort from the profile. Fully deterministic given the seed;
/// row `i` depends only on `(seed, i)`.
pub fn sample_cohort(profile: &GenProfile) -> Result<Cohort> {
    profile.validate()?;
    let registry = default_registry();
    let factor = correlation_factor(&profile.corr_targets);

    let rows: Vec<Row> = (0..profile.n)
        .map(|i| {
            let mut rng = row_rng(profile.seed, COHORT_STREAM_BASE + i as u64);
            let f = sample_features(profile, &factor, &mut rng);
            let mut labels = [0u8; 4];
            for (k, outcome) in OutcomeKind::ALL.iter().enumerate() {
                if let Some(mech) = profile.mechanism(*outcome) {
                    let p = sigmoid(mechanism_logit(profile, mech, &f));
                    let u: f64 = rng.gen();
                    labels[k] = u8::from(u < p);
                }
            }
            let outcomes = raw_outcomes(labels, &mut rng);
            features_to_row(&f, outcomes)
        })
        .collect();

    Cohort::new(registry, rows)
}

/// The correlated standard-normal block behind the intraoperative numerics,
/// one vector per row. Exposed so calibration tests can check the latent
/// correlation structure directly.
pub fn sample_latent_normals(profile: &GenProfile, n: usize) -> Vec<[f64; 8]> {
    let factor = correlation_factor(&profile.corr_targets);
    (0..n)
        .map(|i| {
            let mut rng = row_rng(profile.seed, COHORT_STREAM_BASE + i as u64);
            sample_features(profile, &factor, &mut rng).latent
        })
        .collect()
}

/// Planted true scores and sampled labels for `n_mc` fresh Monte-Carlo rows.
pub fn planted_scores(
    profile: &GenProfile,
    outcome: OutcomeKind,
    n_mc: usize,
) -> Result<(Vec<f64>, Vec<u8>)> {
    let mech = profile
        .mechanism(outcome)
        .ok_or_else(|| Error::Config(format!("no mechanism planted for {}", outcome.name())))?;
    let factor = correlation_factor(&profile.corr_targets);
    let mut scores = Vec::with_capacity(n_mc);
    let mut labels = Vec::with_capacity(n_mc);
    for i in 0..n_mc {
        let mut rng = row_rng(profile.seed, ORACLE_STREAM_BASE + i as u64);
        let f = sample_features(profile, &factor, &mut rng);
        let s = mechanism_logit(profile, mech, &f);
        let u: f64 = rng.gen();
        scores.push(s);
        labels.push(u8::from(u < sigmoid(s)));
    }
    Ok((scores, labels))
}

/// Monte-Carlo AUROC of the true planted score against sampled labels: the
/// ceiling any learned model is compared to.
pub fn bayes_optimal_auc(profile: &GenProfile, outcome: OutcomeKind, n_mc: usize) -> Result<f64> {
    let (scores, labels) = planted_scores(profile, outcome, n_mc)?;
    auroc(&scores, &labels).ok_or_else(|| {
        Error::Degenerate("planted labels are single-class; increase n_mc".to_string())
    })
}

/// Writes a profile as pretty JSON.
pub fn write_profile_json(profile: &GenProfile, path: &std::path::Path) -> Result<()> {
    let json = serde_json::to_string_pretty(profile)?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::binarize_outcome;

    #[test]
    fn default_profile_sets_demographic_targets() {
        let p = default_profile(SurgeryFilter::AllSurgeries, 100, 7).unwrap();
        match p.age {
            NumericMarginal::TruncNormal { mean, sd, .. } => {
                assert_eq!(mean, 73.3);
                assert_eq!(sd, 6.0);
            }
            _ => panic!("age should be truncated normal"),
        }
        let los = p.mechanism(OutcomeKind::Los).unwrap();
        assert!((los.target_prevalence - 1908.0 / 4961.0).abs() < 1e-12);
    }

    #[test]
    fn gynecology_is_all_female() {
        let p = default_profile(SurgeryFilter::Only("gynecology".into()), 200, 7).unwrap();
        let female = p
            .sex
            .levels
            .iter()
            .find(|(l, _)| l == "Female")
            .map(|(_, p)| *p)
            .unwrap();
        assert_eq!(female, 1.0);
        let cohort = sample_cohort(&p).unwrap();
        let sex_idx = cohort.registry.index_of("sex").unwrap();
        assert!(cohort
            .rows
            .iter()
            .all(|r| r.values[sex_idx] == Some(Value::Cat("Female".into()))));
    }

    #[test]
    fn unknown_surgery_is_rejected() {
        assert!(default_profile(SurgeryFilter::Only("podiatry".into()), 10, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = default_profile(SurgeryFilter::AllSurgeries, 50, 42).unwrap();
        let a = sample_cohort(&p).unwrap();
        let b = sample_cohort(&p).unwrap();
        assert_eq!(a, b);
        let p2 = default_profile(SurgeryFilter::AllSurgeries, 50, 43).unwrap();
        let c = sample_cohort(&p2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn row_streams_are_block_independent() {
        // A 10-row cohort is the prefix of a 50-row cohort.
        let mut p = default_profile(SurgeryFilter::AllSurgeries, 50, 11).unwrap();
        let big = sample_cohort(&p).unwrap();
        p.n = 10;
        let small = sample_cohort(&p).unwrap();
        assert_eq!(&big.rows[..10], &small.rows[..]);
    }

    #[test]
    fn psd_repair_is_idempotent_on_psd_input() {
        let mut m = vec![vec![0.0; 8]; 8];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        m[0][1] = 0.5;
        m[1][0] = 0.5;
        let (repaired, passes) = repair_psd(&m).unwrap();
        assert_eq!(passes, 0);
        for i in 0..8 {
            for j in 0..8 {
                assert!((repaired[i][j] - m[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_repair_fixes_indefinite_matrix() {
        // 3x3 with r(0,1)=r(0,2)=0.9 and r(1,2)=-0.9 is not PSD.
        let m = vec![
            vec![1.0, 0.9, 0.9],
            vec![0.9, 1.0, -0.9],
            vec![0.9, -0.9, 1.0],
        ];
        let (repaired, passes) = repair_psd(&m).unwrap();
        assert!(passes >= 1);
        let min = symmetric_eigenvalues(&repaired)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "min eigenvalue {min}");
        for i in 0..3 {
            assert!((repaired[i][i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn planted_prevalence_is_realized() {
        let p = default_profile(SurgeryFilter::AllSurgeries, 4000, 3).unwrap();
        let cohort = sample_cohort(&p).unwrap();
        let labels = binarize_outcome(&cohort, OutcomeKind::Los).unwrap();
        let prev = labels.n_pos() as f64 / labels.y.len() as f64;
        let target = p.mechanism(OutcomeKind::Los).unwrap().target_prevalence;
        let band = 4.0 * (target * (1.0 - target) / 4000.0).sqrt();
        assert!(
            (prev - target).abs() < band + 0.02,
            "prevalence {prev} vs target {target}"
        );
    }

    #[test]
    fn binarized_labels_match_planted_labels() {
        // Raw outcome values must land on the correct side of every
        // threshold, so binarization recovers the planted labels.
        let p = default_profile(SurgeryFilter::Only("urology".into()), 500, 9).unwrap();
        let cohort = sample_cohort(&p).unwrap();
        let pain = binarize_outcome(&cohort, OutcomeKind::AvgPain).unwrap();
        assert!(pain.excluded_rows.is_empty());
        for (row, &label) in cohort.rows.iter().zip(&pain.y) {
            let v = row.outcomes.avg_pain.unwrap();
            if label == 1 {
                assert!(v >= 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn zero_coefficient_mechanism_has_chance_auc() {
        let mut p = default_profile(SurgeryFilter::AllSurgeries, 100, 5).unwrap();
        let mech = p.mechanism_mut(OutcomeKind::Charges).unwrap();
        mech.coefficients.clear();
        mech.disruption = None;
        mech.intercept = 0.0;
        let auc = bayes_optimal_auc(&p, OutcomeKind::Charges, 4000).unwrap();
        assert!(
            (auc - 0.5).abs() < 1e-9,
            "constant score must tie at 0.5, got {auc}"
        );
    }

    #[test]
    fn bayes_auc_is_stable_across_seeds() {
        let a = default_profile(SurgeryFilter::AllSurgeries, 10, 101).unwrap();
        let b = default_profile(SurgeryFilter::AllSurgeries, 10, 202).unwrap();
        let auc_a = bayes_optimal_auc(&a, OutcomeKind::Los, 30_000).unwrap();
        let auc_b = bayes_optimal_auc(&b, OutcomeKind::Los, 30_000).unwrap();
        assert!(
            (auc_a - auc_b).abs() < 0.01,
            "bayes auc unstable: {auc_a} vs {auc_b}"
        );
    }

    #[test]
    fn bayes_auc_is_rank_invariant() {
        let p = default_profile(SurgeryFilter::AllSurgeries, 10, 31).unwrap();
        let (scores, labels) = planted_scores(&p, OutcomeKind::Los, 2000).unwrap();
        let base = auroc(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores
            .iter()
            .map(|s| (s / 3.0).tanh() * 7.0 + 1.0)
            .collect();
        let t = auroc(&transformed, &labels).unwrap();
        assert_eq!(base, t);
    }

    #[test]
    fn marginal_means_track_analytic_targets() {
        let p = default_profile(SurgeryFilter::AllSurgeries, 6000, 77).unwrap();
        let cohort = sample_cohort(&p).unwrap();
        let age_idx = cohort.registry.index_of("age").unwrap();
        let mean: f64 = cohort
            .rows
            .iter()
            .map(|r| r.values[age_idx].as_ref().unwrap().as_num().unwrap())
            .sum::<f64>()
            / cohort.n_rows() as f64;
        let target = p.age.mean();
        let band = 4.0 * p.age.sd() / (cohort.n_rows() as f64).sqrt();
        assert!((mean - target).abs() < band, "age mean {mean} vs {target}");
    }
}
