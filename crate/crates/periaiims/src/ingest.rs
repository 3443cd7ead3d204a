//! Cohort loading, completeness filtering, outcome binarization, and
//! design-matrix encoding with column provenance.
//!
//! Encoding fits scaler state and categorical level sets on the training
//! cohort only; apply-side values outside the training range clip to [0, 1]
//! and unseen categorical levels map to an all-zeros one-hot block.

use crate::data::{
    Cohort, DatasetVariant, FeatureCategory, FeatureKind, FeatureRegistry, MortalityRecord,
    OutcomeKind, RawOutcomes, Row, Value, CHARGES_THRESHOLD_DOLLARS, LOS_SAME_DAY_HOURS,
    MORTALITY_HORIZON_DAYS,
};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Reserved (non-feature) columns in a cohort CSV, in file order after the
/// feature columns.
pub const META_COLUMNS: [&str; 6] = [
    "surgery",
    "los_hours",
    "charges_dollars",
    "death_observed",
    "days_to_death",
    "avg_pain",
];

/// How an encoded column was produced from its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodingRole {
    /// Min-max scaled to [0, 1] with the training-fold bounds.
    ScaledNumeric { min: f64, max: f64 },
    /// Indicator for one observed level of a categorical feature.
    OneHotLevel { level: String },
    /// 0/1 flag passed through unscaled.
    Binary,
}

/// Where an encoded column came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnSource {
    Feature(String),
    SurgeryType,
}

impl ColumnSource {
    pub fn feature_name(&self) -> &str {
        match self {
            ColumnSource::Feature(name) => name.as_str(),
            ColumnSource::SurgeryType => "surgery",
        }
    }
}

/// Provenance of one design-matrix column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub source: ColumnSource,
    pub role: EncodingRole,
}

impl EncodedColumn {
    /// Human-readable column name: feature name, or `feature=level`.
    pub fn name(&self) -> String {
        match &self.role {
            EncodingRole::OneHotLevel { level } => {
                format!("{}={}", self.source.feature_name(), level)
            }
            _ => self.source.feature_name().to_string(),
        }
    }
}

/// Dense row-major design matrix with per-column provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    data: Vec<f64>,
    n_rows: usize,
    pub columns: Vec<EncodedColumn>,
}

impl EncodedMatrix {
    pub fn new(n_rows: usize, columns: Vec<EncodedColumn>) -> Self {
        let n_cols = columns.len();
        EncodedMatrix {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.columns.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.columns.len() + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.columns.len();
        &self.data[row * p..(row + 1) * p]
    }

    /// New matrix with the given rows, preserving provenance.
    pub fn subset_rows(&self, rows: &[usize]) -> EncodedMatrix {
        let p = self.columns.len();
        let mut out = EncodedMatrix::new(rows.len(), self.columns.clone());
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * p..(i + 1) * p].copy_from_slice(self.row(r));
        }
        out
    }

    /// Column values as a vector.
    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    /// Compact signature used to detect provenance mismatches between a
    /// model's training matrix and a prediction-time matrix.
    pub fn signature(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name()).collect()
    }

    /// Writes the matrix as CSV with a sidecar JSON provenance manifest.
    pub fn write_csv_with_manifest(&self, csv_path: &Path, manifest_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(self.columns.iter().map(|c| c.name()))?;
        for r in 0..self.n_rows {
            w.write_record(self.row(r).iter().map(|v| format!("{v}")))?;
        }
        w.flush()
            .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        let manifest = serde_json::to_string_pretty(&self.columns)?;
        std::fs::write(manifest_path, manifest)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))
    }
}

/// Binarized labels for one outcome, plus the rows excluded by the
/// binarization rule itself (e.g. pain strictly between 0 and 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelVector {
    pub y: Vec<u8>,
    pub outcome: OutcomeKind,
    /// Cohort row indices kept, aligned with `y`.
    pub kept_rows: Vec<usize>,
    /// Cohort row indices dropped during binarization.
    pub excluded_rows: Vec<usize>,
}

impl LabelVector {
    pub fn n_pos(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.y.len() - self.n_pos()
    }
}

fn parse_cell(raw: &str, kind: FeatureKind, row: usize, column: &str) -> Result<Option<Value>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match kind {
        FeatureKind::Numeric | FeatureKind::Binary => {
            let v: f64 = raw.parse().map_err(|_| Error::BadCell {
                row,
                column: column.to_string(),
                detail: format!("expected a number, got {raw:?}"),
            })?;
            Ok(Some(Value::Num(v)))
        }
        FeatureKind::Categorical => Ok(Some(Value::Cat(raw.to_string()))),
    }
}

fn parse_opt_f64(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| Error::BadCell {
        row,
        column: column.to_string(),
        detail: format!("expected a number, got {raw:?}"),
    })
}

/// Loads a cohort from a UTF-8 CSV file with a header row. Feature columns
/// must match the registry names exactly; empty cells mark missing values.
pub fn load_cohort(path: &Path, registry: &FeatureRegistry) -> Result<Cohort> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => Error::Csv(e),
        })?;

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }

    // Map every header to either a registry feature or a meta column.
    let mut col_map: Vec<ColumnTarget> = Vec::with_capacity(headers.len());
    for h in &headers {
        if let Some(idx) = registry.index_of(h) {
            col_map.push(ColumnTarget::Feature(idx));
        } else if let Some(m) = META_COLUMNS.iter().position(|m| m == h) {
            col_map.push(ColumnTarget::Meta(m));
        } else {
            return Err(Error::Schema(format!(
                "unknown column {h:?} is not in the feature registry"
            )));
        }
    }
    for spec in &registry.specs {
        if !headers.iter().any(|h| h == &spec.name) {
            return Err(Error::Schema(format!(
                "missing feature column {:?}",
                spec.name
            )));
        }
    }
    for meta in META_COLUMNS {
        if !headers.iter().any(|h| h == meta) {
            return Err(Error::Schema(format!("missing column {meta:?}")));
        }
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut values: Vec<Option<Value>> = vec![None; registry.specs.len()];
        let mut surgery = String::new();
        let mut los = None;
        let mut charges = None;
        let mut death_observed: Option<f64> = None;
        let mut days_to_death: Option<f64> = None;
        let mut pain = None;

        for (c, raw) in record.iter().enumerate() {
            match col_map[c] {
                ColumnTarget::Feature(f) => {
                    values[f] = parse_cell(raw, registry.specs[f].kind, line, &headers[c])?;
                }
                ColumnTarget::Meta(0) => surgery = raw.trim().to_string(),
                ColumnTarget::Meta(1) => los = parse_opt_f64(raw, line, &headers[c])?,
                ColumnTarget::Meta(2) => charges = parse_opt_f64(raw, line, &headers[c])?,
                ColumnTarget::Meta(3) => death_observed = parse_opt_f64(raw, line, &headers[c])?,
                ColumnTarget::Meta(4) => days_to_death = parse_opt_f64(raw, line, &headers[c])?,
                ColumnTarget::Meta(5) => pain = parse_opt_f64(raw, line, &headers[c])?,
                ColumnTarget::Meta(_) => unreachable!(),
            }
        }

        let mortality = match death_observed {
            None => None,
            Some(v) if v == 0.0 => Some(MortalityRecord::Survived),
            Some(v) if v == 1.0 => {
                let days = days_to_death.ok_or_else(|| Error::BadCell {
                    row: line,
                    column: "days_to_death".to_string(),
                    detail: "death_observed is 1 but days_to_death is empty".to_string(),
                })?;
                Some(MortalityRecord::DiedAfterDays(days))
            }
            Some(v) => {
                return Err(Error::BadCell {
                    row: line,
                    column: "death_observed".to_string(),
                    detail: format!("expected 0 or 1, got {v}"),
                })
            }
        };

        rows.push(Row {
            values,
            surgery,
            outcomes: RawOutcomes {
                los_hours: los,
                charges_dollars: charges,
                mortality,
                avg_pain: pain,
            },
        });
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} contains a header but no data rows",
            path.display()
        )));
    }
    Cohort::new(registry.clone(), rows)
}

enum ColumnTarget {
    Feature(usize),
    Meta(usize),
}

/// Writes a cohort as CSV in the canonical column order (registry features,
/// then the meta columns). Float formatting round-trips bit-exactly.
pub fn write_cohort_csv(cohort: &Cohort, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = cohort
        .registry
        .specs
        .iter()
        .map(|s| s.name.clone())
        .collect();
    header.extend(META_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;

    let fmt = |v: &Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
    for row in &cohort.rows {
        let mut rec: Vec<String> = row
            .values
            .iter()
            .map(|v| match v {
                None => String::new(),
                Some(Value::Num(n)) => format!("{n}"),
                Some(Value::Cat(s)) => s.clone(),
            })
            .collect();
        rec.push(row.surgery.clone());
        rec.push(fmt(&row.outcomes.los_hours));
        rec.push(fmt(&row.outcomes.charges_dollars));
        let (observed, days) = match row.outcomes.mortality {
            None => (String::new(), String::new()),
            Some(MortalityRecord::Survived) => ("0".to_string(), String::new()),
            Some(MortalityRecord::DiedAfterDays(d)) => ("1".to_string(), format!("{d}")),
        };
        rec.push(observed);
        rec.push(days);
        rec.push(fmt(&row.outcomes.avg_pain));
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Rows dropped by [`filter_complete`], counted per modality.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped_intraoperative: usize,
    pub dropped_demographic: usize,
    pub dropped_physical_status: usize,
    pub dropped_clock_latent: usize,
    pub dropped_outcome: usize,
    pub dropped_surgery_filter: usize,
    pub kept: usize,
}

fn outcome_present(outcomes: &RawOutcomes, outcome: OutcomeKind) -> bool {
    match outcome {
        OutcomeKind::Los => outcomes.los_hours.is_some(),
        OutcomeKind::Charges => outcomes.charges_dollars.is_some(),
        OutcomeKind::Mortality1y => outcomes.mortality.is_some(),
        OutcomeKind::AvgPain => outcomes.avg_pain.is_some(),
    }
}

/// Keeps only rows that are complete for the variant's feature modalities,
/// match its surgery filter, and carry the requested outcome. Listwise
/// deletion: no imputation.
pub fn filter_complete(
    cohort: &Cohort,
    variant: &DatasetVariant,
    outcome: OutcomeKind,
) -> (Cohort, FilterReport) {
    let mut report = FilterReport::default();
    let categories = variant.kind.categories();
    let mut kept = Vec::new();

    'rows: for row in &cohort.rows {
        if !variant.surgery.includes(&row.surgery) {
            report.dropped_surgery_filter += 1;
            continue;
        }
        for (spec, value) in cohort.registry.specs.iter().zip(&row.values) {
            if categories.contains(&spec.category) && value.is_none() {
                match spec.category {
                    FeatureCategory::Intraoperative => report.dropped_intraoperative += 1,
                    FeatureCategory::Demographic => report.dropped_demographic += 1,
                    FeatureCategory::PhysicalStatus => report.dropped_physical_status += 1,
                    FeatureCategory::ClockLatent => report.dropped_clock_latent += 1,
                }
                continue 'rows;
            }
        }
        if !outcome_present(&row.outcomes, outcome) {
            report.dropped_outcome += 1;
            continue;
        }
        kept.push(row.clone());
    }

    report.kept = kept.len();
    let filtered = Cohort {
        registry: cohort.registry.clone(),
        rows: kept,
    };
    (filtered, report)
}

/// Binarizes one outcome over a cohort whose rows all carry that outcome.
///
/// Labels follow the fixed rules: LOS 1 iff >= 24 h; charges 1 iff >= $30k;
/// mortality 1 iff death within 365 days of discharge; average pain 0 iff
/// exactly 0 and 1 iff >= 1, with rows strictly inside (0, 1) excluded.
pub fn binarize_outcome(cohort: &Cohort, outcome: OutcomeKind) -> Result<LabelVector> {
    let mut y = Vec::new();
    let mut kept_rows = Vec::new();
    let mut excluded_rows = Vec::new();

    for (i, row) in cohort.rows.iter().enumerate() {
        let label = match outcome {
            OutcomeKind::Los => {
                let los = row.outcomes.los_hours.ok_or_else(|| {
                    Error::InvalidValue(format!("row {i}: missing los_hours; filter first"))
                })?;
                if los < 0.0 {
                    return Err(Error::InvalidValue(format!(
                        "row {i}: negative length of stay {los}"
                    )));
                }
                Some(u8::from(los >= LOS_SAME_DAY_HOURS))
            }
            OutcomeKind::Charges => {
                let c = row.outcomes.charges_dollars.ok_or_else(|| {
                    Error::InvalidValue(format!("row {i}: missing charges; filter first"))
                })?;
                if c < 0.0 {
                    return Err(Error::InvalidValue(format!(
                        "row {i}: negative charges {c}"
                    )));
                }
                Some(u8::from(c >= CHARGES_THRESHOLD_DOLLARS))
            }
            OutcomeKind::Mortality1y => {
                let m = row.outcomes.mortality.ok_or_else(|| {
                    Error::InvalidValue(format!("row {i}: missing mortality record; filter first"))
                })?;
                match m {
                    MortalityRecord::Survived => Some(0),
                    MortalityRecord::DiedAfterDays(days) => {
                        if days < 0.0 {
                            return Err(Error::InvalidValue(format!(
                                "row {i}: negative days_to_death {days}"
                            )));
                        }
                        Some(u8::from(days <= MORTALITY_HORIZON_DAYS))
                    }
                }
            }
            OutcomeKind::AvgPain => {
                let p = row.outcomes.avg_pain.ok_or_else(|| {
                    Error::InvalidValue(format!("row {i}: missing avg_pain; filter first"))
                })?;
                if p == 0.0 {
                    Some(0)
                } else if p >= 1.0 {
                    Some(1)
                } else {
                    // Strictly between 0 and 1: neither class rule applies.
                    None
                }
            }
        };
        match label {
            Some(l) => {
                y.push(l);
                kept_rows.push(i);
            }
            None => excluded_rows.push(i),
        }
    }

    Ok(LabelVector {
        y,
        outcome,
        kept_rows,
        excluded_rows,
    })
}

/// Fitted encoder state plus any apply-time warnings.
#[derive(Debug, Clone)]
pub struct EncodedPair {
    pub train: EncodedMatrix,
    pub applied: EncodedMatrix,
    pub warnings: Vec<String>,
}

struct ColumnPlan {
    column: EncodedColumn,
    kind: PlanKind,
}

enum PlanKind {
    Numeric { feature_idx: usize },
    OneHot { feature_idx: usize, level: String },
    Binary { feature_idx: usize },
    Surgery { label: String },
}

/// Encodes two cohorts against a variant: scaler bounds and categorical
/// level sets are fitted on `train` only and applied to both.
pub fn encode(train: &Cohort, apply_to: &Cohort, variant: &DatasetVariant) -> Result<EncodedPair> {
    if train.registry != apply_to.registry {
        return Err(Error::Schema(
            "train and apply cohorts use different registries".to_string(),
        ));
    }
    let registry = &train.registry;
    let mut warnings = Vec::new();
    let categories = variant.kind.categories();

    let mut plans: Vec<ColumnPlan> = Vec::new();
    for (feature_idx, spec) in registry.specs.iter().enumerate() {
        if !categories.contains(&spec.category) {
            continue;
        }
        match spec.kind {
            FeatureKind::Numeric => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for r in 0..train.n_rows() {
                    let v = train.numeric(r, feature_idx).ok_or_else(|| {
                        Error::InvalidValue(format!(
                            "train row {r} missing {}; filter first",
                            spec.name
                        ))
                    })?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo == hi {
                    warnings.push(format!(
                        "numeric column {} is constant on train ({}); emitted as all zeros",
                        spec.name, lo
                    ));
                }
                plans.push(ColumnPlan {
                    column: EncodedColumn {
                        source: ColumnSource::Feature(spec.name.clone()),
                        role: EncodingRole::ScaledNumeric { min: lo, max: hi },
                    },
                    kind: PlanKind::Numeric { feature_idx },
                });
            }
            FeatureKind::Categorical => {
                let mut levels = BTreeSet::new();
                for r in 0..train.n_rows() {
                    let v = train.rows[r].values[feature_idx]
                        .as_ref()
                        .and_then(Value::as_cat)
                        .ok_or_else(|| {
                            Error::InvalidValue(format!(
                                "train row {r} missing {}; filter first",
                                spec.name
                            ))
                        })?;
                    levels.insert(v.to_string());
                }
                for level in levels {
                    plans.push(ColumnPlan {
                        column: EncodedColumn {
                            source: ColumnSource::Feature(spec.name.clone()),
                            role: EncodingRole::OneHotLevel {
                                level: level.clone(),
                            },
                        },
                        kind: PlanKind::OneHot { feature_idx, level },
                    });
                }
            }
            FeatureKind::Binary => {
                plans.push(ColumnPlan {
                    column: EncodedColumn {
                        source: ColumnSource::Feature(spec.name.clone()),
                        role: EncodingRole::Binary,
                    },
                    kind: PlanKind::Binary { feature_idx },
                });
            }
        }
        // Surgery one-hot block sits right after the intraoperative
        // numerics, mirroring the registry's modality order.
        if spec.name == "ephedrine_mg" && variant.includes_surgery_onehot() {
            for label in &registry.surgery_types {
                plans.push(ColumnPlan {
                    column: EncodedColumn {
                        source: ColumnSource::SurgeryType,
                        role: EncodingRole::OneHotLevel {
                            level: label.clone(),
                        },
                    },
                    kind: PlanKind::Surgery {
                        label: label.clone(),
                    },
                });
            }
        }
    }

    let columns: Vec<EncodedColumn> = plans.iter().map(|p| p.column.clone()).collect();
    let mut seen_unseen: BTreeSet<String> = BTreeSet::new();

    let mut fill = |cohort: &Cohort, track_unseen: bool| -> Result<EncodedMatrix> {
        let mut m = EncodedMatrix::new(cohort.n_rows(), columns.clone());
        for r in 0..cohort.n_rows() {
            for (c, plan) in plans.iter().enumerate() {
                let v = match &plan.kind {
                    PlanKind::Numeric { feature_idx } => {
                        let raw = cohort.numeric(r, *feature_idx).ok_or_else(|| {
                            Error::InvalidValue(format!(
                                "row {r} missing {}; filter first",
                                plan.column.source.feature_name()
                            ))
                        })?;
                        match plan.column.role {
                            EncodingRole::ScaledNumeric { min, max } => {
                                if max == min {
                                    0.0
                                } else {
                                    ((raw - min) / (max - min)).clamp(0.0, 1.0)
                                }
                            }
                            _ => unreachable!(),
                        }
                    }
                    PlanKind::OneHot { feature_idx, level } => {
                        let raw = cohort.rows[r].values[*feature_idx]
                            .as_ref()
                            .and_then(Value::as_cat)
                            .ok_or_else(|| {
                                Error::InvalidValue(format!(
                                    "row {r} missing {}; filter first",
                                    plan.column.source.feature_name()
                                ))
                            })?;
                        f64::from(raw == level)
                    }
                    PlanKind::Binary { feature_idx } => {
                        cohort.numeric(r, *feature_idx).ok_or_else(|| {
                            Error::InvalidValue(format!(
                                "row {r} missing {}; filter first",
                                plan.column.source.feature_name()
                            ))
                        })?
                    }
                    PlanKind::Surgery { label } => f64::from(&cohort.rows[r].surgery == label),
                };
                m.set(r, c, v);
            }
            if track_unseen {
                // Detect apply-side categorical levels absent from training.
                for (feature_idx, spec) in cohort.registry.specs.iter().enumerate() {
                    if spec.kind != FeatureKind::Categorical || !categories.contains(&spec.category)
                    {
                        continue;
                    }
                    if let Some(raw) = cohort.rows[r].values[feature_idx]
                        .as_ref()
                        .and_then(Value::as_cat)
                    {
                        let known = plans.iter().any(|p| match &p.kind {
                            PlanKind::OneHot {
                                feature_idx: f,
                                level,
                            } => *f == feature_idx && level == raw,
                            _ => false,
                        });
                        if !known {
                            seen_unseen.insert(format!("{}={}", spec.name, raw));
                        }
                    }
                }
            }
        }
        Ok(m)
    };

    let train_m = fill(train, false)?;
    let applied_m = fill(apply_to, true)?;
    for unseen in seen_unseen {
        warnings.push(format!(
            "unseen categorical level {unseen} at apply time; one-hot block left all zeros"
        ));
    }

    Ok(EncodedPair {
        train: train_m,
        applied: applied_m,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_registry, SurgeryFilter, VariantKind};

    fn tiny_cohort() -> Cohort {
        // Three complete rows over the full registry.
        let registry = default_registry();
        let n = registry.specs.len();
        let mut rows = Vec::new();
        for i in 0..3 {
            let mut values = Vec::with_capacity(n);
            for spec in &registry.specs {
                let v = match spec.kind {
                    FeatureKind::Numeric => Some(Value::Num(1.0 + i as f64 + values.len() as f64)),
                    FeatureKind::Binary => Some(Value::Num(f64::from(i % 2 == 0))),
                    FeatureKind::Categorical => Some(Value::Cat(if i == 0 {
                        "A".to_string()
                    } else {
                        "B".to_string()
                    })),
                };
                values.push(v);
            }
            rows.push(Row {
                values,
                surgery: ["orthopedics", "urology", "gynecology"][i].to_string(),
                outcomes: RawOutcomes {
                    los_hours: Some(10.0 + 20.0 * i as f64),
                    charges_dollars: Some(25_000.0 + 5_000.0 * i as f64),
                    mortality: Some(if i == 2 {
                        MortalityRecord::DiedAfterDays(100.0)
                    } else {
                        MortalityRecord::Survived
                    }),
                    avg_pain: Some([0.0, 0.5, 3.0][i]),
                },
            });
        }
        Cohort::new(registry, rows).unwrap()
    }

    #[test]
    fn csv_round_trip_preserves_values_and_missingness() {
        let mut cohort = tiny_cohort();
        cohort.rows[1].values[3] = None; // blank iso_sev_mac
        cohort.rows[2].outcomes.charges_dollars = None;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let back = load_cohort(&path, &cohort.registry).unwrap();
        assert_eq!(cohort, back);
    }

    #[test]
    fn load_keeps_row_with_blank_cell_masked() {
        let mut cohort = tiny_cohort();
        cohort.rows[1].values[3] = None;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let back = load_cohort(&path, &cohort.registry).unwrap();
        assert_eq!(back.n_rows(), 3);
        assert_eq!(back.rows[1].values[3], None);
    }

    #[test]
    fn load_rejects_unknown_column() {
        let cohort = tiny_cohort();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = format!("bmi_admission,{}", lines.next().unwrap());
        let rest: Vec<String> = lines.map(|l| format!("27.5,{l}")).collect();
        std::fs::write(&path, format!("{header}\n{}", rest.join("\n"))).unwrap();
        let err = load_cohort(&path, &cohort.registry).unwrap_err();
        assert!(err.to_string().contains("bmi_admission"), "{err}");
    }

    #[test]
    fn load_rejects_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(load_cohort(&path, &default_registry()).is_err());
    }

    #[test]
    fn load_reports_unparseable_cell_with_row_and_column() {
        let cohort = tiny_cohort();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let patched = text.replacen("11,", "eleven,", 1);
        assert_ne!(text, patched);
        std::fs::write(&path, patched).unwrap();
        let err = load_cohort(&path, &cohort.registry).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row") && msg.contains("eleven"), "{msg}");
    }

    #[test]
    fn filter_complete_passes_complete_cohort_through() {
        let cohort = tiny_cohort();
        let variant =
            DatasetVariant::new(VariantKind::PeriOpCognitive, SurgeryFilter::AllSurgeries);
        let (filtered, report) = filter_complete(&cohort, &variant, OutcomeKind::Los);
        assert_eq!(filtered.n_rows(), 3);
        assert_eq!(report.kept, 3);
    }

    #[test]
    fn filter_complete_is_modality_aware() {
        // 10 rows, 3 missing a clock latent: PeriOpCognitive drops them,
        // PeriOp keeps all 10.
        let registry = default_registry();
        let clock_idx = registry.index_of("clock_size").unwrap();
        let base = tiny_cohort();
        let mut rows = Vec::new();
        for i in 0..10 {
            let mut row = base.rows[i % 3].clone();
            if i < 3 {
                row.values[clock_idx] = None;
            }
            rows.push(row);
        }
        let cohort = Cohort::new(registry, rows).unwrap();

        let cog = DatasetVariant::new(VariantKind::PeriOpCognitive, SurgeryFilter::AllSurgeries);
        let (filtered, report) = filter_complete(&cohort, &cog, OutcomeKind::Los);
        assert_eq!(filtered.n_rows(), 7);
        assert_eq!(report.dropped_clock_latent, 3);

        let peri = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let (filtered, _) = filter_complete(&cohort, &peri, OutcomeKind::Los);
        assert_eq!(filtered.n_rows(), 10);
    }

    #[test]
    fn binarize_charges_boundary() {
        let mut cohort = tiny_cohort();
        cohort.rows[0].outcomes.charges_dollars = Some(29_999.99);
        cohort.rows[1].outcomes.charges_dollars = Some(30_000.0);
        cohort.rows[2].outcomes.charges_dollars = Some(45_000.0);
        let labels = binarize_outcome(&cohort, OutcomeKind::Charges).unwrap();
        assert_eq!(labels.y, vec![0, 1, 1]);
    }

    #[test]
    fn binarize_mortality_day_boundary() {
        let mut cohort = tiny_cohort();
        cohort.rows[0].outcomes.mortality = Some(MortalityRecord::DiedAfterDays(366.0));
        cohort.rows[1].outcomes.mortality = Some(MortalityRecord::DiedAfterDays(365.0));
        cohort.rows[2].outcomes.mortality = Some(MortalityRecord::Survived);
        let labels = binarize_outcome(&cohort, OutcomeKind::Mortality1y).unwrap();
        assert_eq!(labels.y, vec![0, 1, 0]);
    }

    #[test]
    fn binarize_pain_excludes_fractional_band() {
        let cohort = tiny_cohort(); // pains 0.0, 0.5, 3.0
        let labels = binarize_outcome(&cohort, OutcomeKind::AvgPain).unwrap();
        assert_eq!(labels.y, vec![0, 1]);
        assert_eq!(labels.excluded_rows, vec![1]);
        assert_eq!(labels.kept_rows, vec![0, 2]);
        assert_eq!(labels.y.len() + labels.excluded_rows.len(), 3);
        // Exclusion is exactly the complement of the two class rules.
        let p = cohort.rows[1].outcomes.avg_pain.unwrap();
        assert!(p != 0.0 && p < 1.0);
    }

    #[test]
    fn binarize_rejects_negative_values() {
        let mut cohort = tiny_cohort();
        cohort.rows[0].outcomes.los_hours = Some(-1.0);
        assert!(binarize_outcome(&cohort, OutcomeKind::Los).is_err());
        let mut cohort = tiny_cohort();
        cohort.rows[0].outcomes.charges_dollars = Some(-5.0);
        assert!(binarize_outcome(&cohort, OutcomeKind::Charges).is_err());
    }

    #[test]
    fn encode_intraop_all_surgeries_width() {
        // Independent schema walk: expected width = numerics + one column
        // per surgery type.
        let cohort = tiny_cohort();
        let variant = DatasetVariant::new(VariantKind::IntraOp, SurgeryFilter::AllSurgeries);
        let expected: usize = {
            let numerics = cohort
                .registry
                .specs
                .iter()
                .filter(|s| {
                    s.category == FeatureCategory::Intraoperative && s.kind == FeatureKind::Numeric
                })
                .count();
            numerics + cohort.registry.surgery_types.len()
        };
        assert_eq!(expected, 14);
        let pair = encode(&cohort, &cohort, &variant).unwrap();
        assert_eq!(pair.train.n_cols(), expected);
    }

    #[test]
    fn encode_min_maps_to_zero_and_onehot_is_exact() {
        let cohort = tiny_cohort();
        let variant = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let pair = encode(&cohort, &cohort, &variant).unwrap();
        let age_col = pair.train.column_index("age").unwrap();
        let vals = pair.train.column_values(age_col);
        assert_eq!(vals[0], 0.0);
        assert_eq!(vals[2], 1.0);

        let sex_a = pair.train.column_index("sex=A").unwrap();
        let sex_b = pair.train.column_index("sex=B").unwrap();
        for r in 0..3 {
            let block = pair.train.get(r, sex_a) + pair.train.get(r, sex_b);
            assert_eq!(block, 1.0);
        }
    }

    #[test]
    fn encode_clips_out_of_range_and_reports_unseen_levels() {
        let train = tiny_cohort();
        let mut apply = tiny_cohort();
        let age_idx = train.registry.index_of("age").unwrap();
        let sex_idx = train.registry.index_of("sex").unwrap();
        apply.rows[0].values[age_idx] = Some(Value::Num(1e6));
        apply.rows[1].values[sex_idx] = Some(Value::Cat("C".into()));
        let variant = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let pair = encode(&train, &apply, &variant).unwrap();
        let age_col = pair.train.column_index("age").unwrap();
        assert_eq!(pair.applied.get(0, age_col), 1.0);
        let sex_a = pair.train.column_index("sex=A").unwrap();
        let sex_b = pair.train.column_index("sex=B").unwrap();
        assert_eq!(pair.applied.get(1, sex_a) + pair.applied.get(1, sex_b), 0.0);
        assert!(
            pair.warnings.iter().any(|w| w.contains("sex=C")),
            "{:?}",
            pair.warnings
        );
    }

    #[test]
    fn encode_constant_column_yields_zeros_with_warning() {
        let mut train = tiny_cohort();
        let idx = train.registry.index_of("duration_min").unwrap();
        for row in &mut train.rows {
            row.values[idx] = Some(Value::Num(120.0));
        }
        let variant = DatasetVariant::new(VariantKind::IntraOp, SurgeryFilter::AllSurgeries);
        let pair = encode(&train, &train, &variant).unwrap();
        let col = pair.train.column_index("duration_min").unwrap();
        assert!(pair.train.column_values(col).iter().all(|&v| v == 0.0));
        assert!(pair
            .warnings
            .iter()
            .any(|w| w.contains("duration_min") && w.contains("constant")));
    }

    #[test]
    fn encode_never_consults_apply_statistics() {
        let train = tiny_cohort();
        let mut wild = tiny_cohort();
        let age_idx = train.registry.index_of("age").unwrap();
        wild.rows[0].values[age_idx] = Some(Value::Num(-500.0));
        wild.rows[2].values[age_idx] = Some(Value::Num(9999.0));
        let empty = Cohort {
            registry: train.registry.clone(),
            rows: vec![],
        };
        let variant = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let with_apply = encode(&train, &wild, &variant).unwrap();
        let without = encode(&train, &empty, &variant).unwrap();
        assert_eq!(with_apply.train.columns, without.train.columns);
        assert_eq!(with_apply.train, without.train);
    }

    #[test]
    fn variant_columns_are_provenance_nested() {
        let cohort = tiny_cohort();
        let peri = DatasetVariant::new(VariantKind::PeriOp, SurgeryFilter::AllSurgeries);
        let cog = DatasetVariant::new(VariantKind::PeriOpCognitive, SurgeryFilter::AllSurgeries);
        let a = encode(&cohort, &cohort, &peri).unwrap().train;
        let b = encode(&cohort, &cohort, &cog).unwrap().train;
        let b_names = b.signature();
        let mut last = 0usize;
        for name in a.signature() {
            let pos = b_names
                .iter()
                .position(|n| *n == name)
                .expect("missing column");
            assert!(pos >= last, "column order not preserved");
            last = pos;
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let cohort = tiny_cohort();
        let variant =
            DatasetVariant::new(VariantKind::PeriOpCognitive, SurgeryFilter::AllSurgeries);
        let a = encode(&cohort, &cohort, &variant).unwrap();
        let b = encode(&cohort, &cohort, &variant).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.applied, b.applied);
    }
}
