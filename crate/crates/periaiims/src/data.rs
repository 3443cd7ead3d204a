//! Typed feature registry, cohorts, outcomes, and the dataset-variant vocabulary.
//!
//! Everything here is immutable after construction and safe to share across
//! threads without synchronization.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Value kind of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

/// Modality a feature belongs to. Dataset variants are unions of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Intraoperative,
    Demographic,
    PhysicalStatus,
    ClockLatent,
}

/// One feature column: name, kind, modality, and free-text units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub category: FeatureCategory,
    pub units: String,
}

impl FeatureSpec {
    fn new(name: &str, kind: FeatureKind, category: FeatureCategory, units: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind,
            category,
            units: units.to_string(),
        }
    }
}

/// Number of latent dimensions used to represent a clock drawing.
pub const CLOCK_LATENT_DIMS: usize = 10;

/// A 10-dimensional clock-drawing representation. The first six dimensions
/// carry named constructional factors; the rest are index-named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockLatent {
    z: [f64; CLOCK_LATENT_DIMS],
}

impl ClockLatent {
    pub const DIM_NAMES: [&'static str; CLOCK_LATENT_DIMS] = [
        "clock_size",
        "rotated_ellipse",
        "rotated_vertical_ellipse",
        "upward_displaced_hands",
        "ovate_obovate_shape",
        "obtuse_hand_angle",
        "z7",
        "z8",
        "z9",
        "z10",
    ];

    pub fn new(z: [f64; CLOCK_LATENT_DIMS]) -> Result<Self> {
        if let Some(v) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "clock latent contains non-finite value {v}"
            )));
        }
        Ok(ClockLatent { z })
    }

    pub fn values(&self) -> &[f64; CLOCK_LATENT_DIMS] {
        &self.z
    }
}

impl TryFrom<Vec<f64>> for ClockLatent {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let z: [f64; CLOCK_LATENT_DIMS] = v.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidValue(format!(
                "clock latent must have exactly {CLOCK_LATENT_DIMS} dimensions, got {}",
                v.len()
            ))
        })?;
        ClockLatent::new(z)
    }
}

/// Ordered list of feature specs plus the known surgery labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    pub specs: Vec<FeatureSpec>,
    pub surgery_types: Vec<String>,
}

/// The six surgical groups with enough data for per-surgery analysis.
pub const SURGERY_TYPES: [&str; 6] = [
    "orthopedics",
    "neurosurgery",
    "cardiovascular",
    "urology",
    "gynecology",
    "otolaryngology",
];

/// The eight intraoperative numeric variables, in canonical order.
pub const INTRAOP_NUMERICS: [&str; 8] = [
    "duration_min",
    "propofol_mg",
    "oral_mme_mg",
    "iso_sev_mac",
    "avg_nibp",
    "sd_nibp",
    "phenylephrine_mcg",
    "ephedrine_mg",
];

/// The six comorbidity flags, in canonical order.
pub const COMORBIDITIES: [&str; 6] = [
    "sleep_apnea",
    "diabetes",
    "hyperlipidemia",
    "hypertension",
    "movement_disorder",
    "cognitive_disorder",
];

/// Builds the canonical registry: 8 intraoperative numerics, demographics,
/// physical status with the six comorbidity flags, and 10 clock latents,
/// over the six surgery groups.
pub fn default_registry() -> FeatureRegistry {
    use FeatureCategory::{ClockLatent as ClockCat, Demographic, Intraoperative, PhysicalStatus};
    use FeatureKind::{Binary, Categorical, Numeric};

    let mut specs = Vec::new();
    let intraop_units = [
        "minutes",
        "mg",
        "mg",
        "dimensionless",
        "mmHg",
        "mmHg",
        "mcg",
        "mg",
    ];
    for (name, units) in INTRAOP_NUMERICS.iter().zip(intraop_units) {
        specs.push(FeatureSpec::new(name, Numeric, Intraoperative, units));
    }

    specs.push(FeatureSpec::new("age", Numeric, Demographic, "years"));
    specs.push(FeatureSpec::new("sex", Categorical, Demographic, "level"));
    specs.push(FeatureSpec::new("race", Categorical, Demographic, "level"));
    specs.push(FeatureSpec::new(
        "ethnicity",
        Categorical,
        Demographic,
        "level",
    ));
    specs.push(FeatureSpec::new(
        "education_years",
        Numeric,
        Demographic,
        "years",
    ));
    specs.push(FeatureSpec::new("adi", Numeric, Demographic, "percentile"));

    specs.push(FeatureSpec::new(
        "asa",
        Numeric,
        PhysicalStatus,
        "ordinal 1-5",
    ));
    specs.push(FeatureSpec::new(
        "frailty",
        Numeric,
        PhysicalStatus,
        "score 0-5",
    ));
    for name in COMORBIDITIES {
        specs.push(FeatureSpec::new(name, Binary, PhysicalStatus, "flag"));
    }

    for name in ClockLatent::DIM_NAMES {
        specs.push(FeatureSpec::new(name, Numeric, ClockCat, "dimensionless"));
    }

    FeatureRegistry {
        specs,
        surgery_types: SURGERY_TYPES.iter().map(|s| s.to_string()).collect(),
    }
}

impl FeatureRegistry {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn spec(&self, name: &str) -> Option<&FeatureSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Feature names belonging to the given categories, in registry order.
    pub fn names_in(&self, categories: &[FeatureCategory]) -> Vec<&str> {
        self.specs
            .iter()
            .filter(|s| categories.contains(&s.category))
            .map(|s| s.name.as_str())
            .collect()
    }

    /// Validates registry-wide invariants: unique names, and exactly ten
    /// numeric clock-latent dims when any are present.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for spec in &self.specs {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate feature name {}",
                    spec.name
                )));
            }
        }
        let clock: Vec<_> = self
            .specs
            .iter()
            .filter(|s| s.category == FeatureCategory::ClockLatent)
            .collect();
        if !clock.is_empty() {
            if clock.len() != CLOCK_LATENT_DIMS {
                return Err(Error::Schema(format!(
                    "clock latent features must number exactly {CLOCK_LATENT_DIMS}, found {}",
                    clock.len()
                )));
            }
            if clock.iter().any(|s| s.kind != FeatureKind::Numeric) {
                return Err(Error::Schema(
                    "clock latent features must be numeric".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// A single observed cell value. Missing values are represented by `None`
/// in the row vector, never by sentinels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Num(_) => None,
            Value::Cat(s) => Some(s.as_str()),
        }
    }
}

/// Mortality follow-up record: event indicator plus days from discharge to
/// death when the event was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MortalityRecord {
    Survived,
    DiedAfterDays(f64),
}

/// Raw (un-binarized) outcome values for one row. `None` = missing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawOutcomes {
    pub los_hours: Option<f64>,
    pub charges_dollars: Option<f64>,
    pub mortality: Option<MortalityRecord>,
    pub avg_pain: Option<f64>,
}

/// One patient row: per-spec feature values (missing = `None`), the surgery
/// label, and the raw outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub values: Vec<Option<Value>>,
    pub surgery: String,
    pub outcomes: RawOutcomes,
}

/// A cohort: a registry plus rows conforming to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub registry: FeatureRegistry,
    pub rows: Vec<Row>,
}

impl Cohort {
    pub fn new(registry: FeatureRegistry, rows: Vec<Row>) -> Result<Self> {
        let cohort = Cohort { registry, rows };
        cohort.validate()?;
        Ok(cohort)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Checks every row against the registry schema: vector length, value
    /// kind per spec, surgery label membership, and outcome ranges.
    pub fn validate(&self) -> Result<()> {
        self.registry.validate()?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.values.len() != self.registry.specs.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, registry has {} features",
                    row.values.len(),
                    self.registry.specs.len()
                )));
            }
            if !self
                .registry
                .surgery_types
                .iter()
                .any(|s| *s == row.surgery)
            {
                return Err(Error::UnknownSurgery(row.surgery.clone()));
            }
            for (spec, value) in self.registry.specs.iter().zip(&row.values) {
                let Some(value) = value else { continue };
                match (spec.kind, value) {
                    (FeatureKind::Numeric, Value::Num(v)) => {
                        if !v.is_finite() {
                            return Err(Error::InvalidValue(format!(
                                "row {i}, {}: non-finite numeric value",
                                spec.name
                            )));
                        }
                        if spec.name == "frailty" && *v < 0.0 {
                            return Err(Error::InvalidValue(format!(
                                "row {i}: frailty must be non-negative, got {v}"
                            )));
                        }
                    }
                    (FeatureKind::Binary, Value::Num(v)) => {
                        if *v != 0.0 && *v != 1.0 {
                            return Err(Error::InvalidValue(format!(
                                "row {i}, {}: binary value must be 0 or 1, got {v}",
                                spec.name
                            )));
                        }
                    }
                    (FeatureKind::Categorical, Value::Cat(_)) => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "row {i}, {}: value does not match declared kind {:?}",
                            spec.name, spec.kind
                        )));
                    }
                }
            }
            if let Some(p) = row.outcomes.avg_pain {
                if !(0.0..=10.0).contains(&p) {
                    return Err(Error::InvalidValue(format!(
                        "row {i}: avg_pain must lie in [0, 10], got {p}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value of a numeric feature on a row, `None` when missing.
    pub fn numeric(&self, row: usize, feature_idx: usize) -> Option<f64> {
        self.rows[row].values[feature_idx]
            .as_ref()
            .and_then(Value::as_num)
    }
}

/// The four binarized outcomes. Thresholds are fixed constants, not knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    /// 0: same-day discharge (< 24 h), 1: longer than one day.
    Los,
    /// 0: charges < $30,000, 1: charges >= $30,000.
    Charges,
    /// 1: death within 365 days of discharge.
    Mortality1y,
    /// 0: average pain = 0, 1: average pain >= 1; rows in (0, 1) excluded.
    AvgPain,
}

/// Hours below which a stay counts as same-day discharge.
pub const LOS_SAME_DAY_HOURS: f64 = 24.0;
/// Dollar threshold separating the charge classes.
pub const CHARGES_THRESHOLD_DOLLARS: f64 = 30_000.0;
/// Follow-up horizon for the mortality outcome, in days from discharge.
pub const MORTALITY_HORIZON_DAYS: f64 = 365.0;

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [
        OutcomeKind::Los,
        OutcomeKind::Charges,
        OutcomeKind::Mortality1y,
        OutcomeKind::AvgPain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::Los => "los",
            OutcomeKind::Charges => "charges",
            OutcomeKind::Mortality1y => "mortality_1y",
            OutcomeKind::AvgPain => "avg_pain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(OutcomeKind::Los),
            "charges" => Ok(OutcomeKind::Charges),
            "mortality_1y" | "mortality" => Ok(OutcomeKind::Mortality1y),
            "avg_pain" | "pain" => Ok(OutcomeKind::AvgPain),
            other => Err(Error::Config(format!("unknown outcome {other}"))),
        }
    }
}

/// Label for the mortality outcome given days from discharge to death:
/// 1 iff the death fell within the 365-day horizon.
pub fn mortality_label_from_days(days_to_death: f64) -> u8 {
    u8::from(days_to_death <= MORTALITY_HORIZON_DAYS)
}

/// Which feature modalities a variant includes, and whether rows are
/// restricted to one surgery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    IntraOp,
    PeriOp,
    PeriOpCognitive,
}

impl VariantKind {
    pub const ALL: [VariantKind; 3] = [
        VariantKind::IntraOp,
        VariantKind::PeriOp,
        VariantKind::PeriOpCognitive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VariantKind::IntraOp => "intra_op",
            VariantKind::PeriOp => "peri_op",
            VariantKind::PeriOpCognitive => "peri_op_cognitive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "intra_op" => Ok(VariantKind::IntraOp),
            "peri_op" => Ok(VariantKind::PeriOp),
            "peri_op_cognitive" => Ok(VariantKind::PeriOpCognitive),
            other => Err(Error::Config(format!("unknown variant {other}"))),
        }
    }

    /// Feature categories included by this variant. Nested by construction:
    /// IntraOp is a subset of PeriOp, which is a subset of PeriOpCognitive.
    pub fn categories(&self) -> &'static [FeatureCategory] {
        use FeatureCategory::*;
        match self {
            VariantKind::IntraOp => &[Intraoperative],
            VariantKind::PeriOp => &[Intraoperative, Demographic, PhysicalStatus],
            VariantKind::PeriOpCognitive => {
                &[Intraoperative, Demographic, PhysicalStatus, ClockLatent]
            }
        }
    }
}

/// Cohort scope: one surgery group, or every surgery pooled together. The
/// pooled case adds surgery-type one-hot columns to the design matrix; a
/// single-surgery cohort excludes them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurgeryFilter {
    AllSurgeries,
    Only(String),
}

impl SurgeryFilter {
    pub fn name(&self) -> &str {
        match self {
            SurgeryFilter::AllSurgeries => "all_surgeries",
            SurgeryFilter::Only(s) => s.as_str(),
        }
    }

    pub fn parse(s: &str, registry: &FeatureRegistry) -> Result<Self> {
        if s == "all_surgeries" || s == "all" {
            return Ok(SurgeryFilter::AllSurgeries);
        }
        if registry.surgery_types.iter().any(|t| t == s) {
            Ok(SurgeryFilter::Only(s.to_string()))
        } else {
            Err(Error::UnknownSurgery(s.to_string()))
        }
    }

    pub fn includes(&self, surgery: &str) -> bool {
        match self {
            SurgeryFilter::AllSurgeries => true,
            SurgeryFilter::Only(s) => s == surgery,
        }
    }
}

/// A dataset variant: feature scope plus surgery scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetVariant {
    pub kind: VariantKind,
    pub surgery: SurgeryFilter,
}

impl DatasetVariant {
    pub fn new(kind: VariantKind, surgery: SurgeryFilter) -> Self {
        DatasetVariant { kind, surgery }
    }

    /// Registry feature names included by this variant, in registry order.
    pub fn feature_names<'r>(&self, registry: &'r FeatureRegistry) -> Vec<&'r str> {
        registry.names_in(self.kind.categories())
    }

    /// Whether surgery-type one-hot columns are part of the design matrix.
    pub fn includes_surgery_onehot(&self) -> bool {
        self.surgery == SurgeryFilter::AllSurgeries
    }
}

/// Writes the registry as JSON (names, kinds, categories, units).
pub fn write_registry_json(registry: &FeatureRegistry, path: &std::path::Path) -> Result<()> {
    let json = serde_json::to_string_pretty(registry)?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_has_eight_intraop_numerics() {
        let reg = default_registry();
        let intra: Vec<_> = reg
            .specs
            .iter()
            .filter(|s| s.category == FeatureCategory::Intraoperative)
            .collect();
        assert_eq!(intra.len(), 8);
        assert!(intra.iter().all(|s| s.kind == FeatureKind::Numeric));
        let names: Vec<_> = intra.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, INTRAOP_NUMERICS.to_vec());
    }

    #[test]
    fn default_registry_has_ten_clock_latents() {
        let reg = default_registry();
        let clock: Vec<_> = reg
            .specs
            .iter()
            .filter(|s| s.category == FeatureCategory::ClockLatent)
            .collect();
        assert_eq!(clock.len(), CLOCK_LATENT_DIMS);
        assert_eq!(clock[0].name, "clock_size");
    }

    #[test]
    fn default_registry_has_six_surgery_types() {
        let reg = default_registry();
        assert_eq!(reg.surgery_types.len(), 6);
        reg.validate().unwrap();
    }

    #[test]
    fn variant_feature_sets_are_nested() {
        let reg = default_registry();
        let intra = DatasetVariant::new(VariantKind::IntraOp, SurgeryFilter::AllSurgeries);
        let peri = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let cog = DatasetVariant::new(VariantKind::PeriOpCognitive, SurgeryFilter::AllSurgeries);
        let a: std::collections::HashSet<_> = intra.feature_names(&reg).into_iter().collect();
        let b: std::collections::HashSet<_> = peri.feature_names(&reg).into_iter().collect();
        let c: std::collections::HashSet<_> = cog.feature_names(&reg).into_iter().collect();
        assert!(a.is_subset(&b));
        assert!(b.is_subset(&c));
        assert!(a.len() < b.len() && b.len() < c.len());
    }

    #[test]
    fn clock_latent_requires_ten_finite_dims() {
        assert!(ClockLatent::try_from(vec![0.0; 9]).is_err());
        assert!(ClockLatent::try_from(vec![0.0; 10]).is_ok());
        let mut bad = vec![0.0; 10];
        bad[3] = f64::NAN;
        assert!(ClockLatent::try_from(bad).is_err());
    }

    #[test]
    fn mortality_day_boundary() {
        assert_eq!(mortality_label_from_days(365.0), 1);
        assert_eq!(mortality_label_from_days(366.0), 0);
        assert_eq!(mortality_label_from_days(10.0), 1);
    }

    #[test]
    fn cohort_rejects_schema_violations() {
        let reg = default_registry();
        let n = reg.specs.len();
        let row = Row {
            values: vec![None; n],
            surgery: "orthopedics".into(),
            outcomes: RawOutcomes::default(),
        };
        assert!(Cohort::new(reg.clone(), vec![row.clone()]).is_ok());

        let mut bad = row.clone();
        bad.surgery = "podiatry".into();
        assert!(Cohort::new(reg.clone(), vec![bad]).is_err());

        let mut bad = row.clone();
        bad.values[0] = Some(Value::Cat("oops".into()));
        assert!(Cohort::new(reg.clone(), vec![bad]).is_err());

        let mut bad = row;
        bad.outcomes.avg_pain = Some(11.0);
        assert!(Cohort::new(reg, vec![bad]).is_err());
    }

    #[test]
    fn cohort_json_round_trip_is_exact() {
        let reg = default_registry();
        let n = reg.specs.len();
        let mut values = vec![None; n];
        values[0] = Some(Value::Num(123.456789012345));
        values[9] = Some(Value::Cat("Female".into()));
        values[5] = None;
        let row = Row {
            values,
            surgery: "gynecology".into(),
            outcomes: RawOutcomes {
                los_hours: Some(31.25),
                charges_dollars: None,
                mortality: Some(MortalityRecord::DiedAfterDays(400.0)),
                avg_pain: Some(2.5),
            },
        };
        let cohort = Cohort::new(reg, vec![row]).unwrap();
        let json = serde_json::to_string(&cohort).unwrap();
        let back: Cohort = serde_json::from_str(&json).unwrap();
        assert_eq!(cohort, back);
    }
}
