//! End-to-end orchestration: cohort acquisition, per-cell model selection,
//! bootstrap evaluation, attribution, correlation networks, disruption
//! detection, and the report bundle on disk.
//!
//! A cell is one (surgery, outcome) pair. Cells run independently in a
//! work pool; a failing cell is recorded in the manifest and does not stop
//! the others. Every random choice derives from the master seed through
//! stable string tags, so a re-run with the same config is bit-identical
//! in every table (timings in the manifest are metadata, not results).

use crate::data::{
    default_registry, Cohort, DatasetVariant, OutcomeKind, SurgeryFilter, VariantKind,
    SURGERY_TYPES,
};
use crate::error::{Error, Result};
use crate::eval::{
    bootstrap_ci, fit_cost_estimate, grid_search, select_best, stratified_kfold, train_test_split,
    Candidate, MetricCI,
};
use crate::explain::{background_sample, explain_model, rank_impacts};
use crate::ingest::{
    binarize_outcome, encode, filter_complete, load_cohort, write_cohort_csv, EncodedMatrix,
    LabelVector,
};
use crate::models::{default_grid, fit, Hyperparams, ModelFamily, TrainedModel};
use crate::netcorr::{build_network, disruption_report, intraop_pearson, Disruption};
use crate::svg::{beeswarm_svg, heatmap_svg, network_svg};
use crate::synth::{default_profile, sample_cohort, write_profile_json, GenProfile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where cohort rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    /// Calibrated synthetic cohorts, one per requested surgery scope.
    Synthetic { n_per_group: usize },
    /// A cohort CSV conforming to the default registry.
    CohortCsv { path: PathBuf },
}

fn default_variants() -> Vec<VariantKind> {
    VariantKind::ALL.to_vec()
}

fn default_surgeries() -> Vec<String> {
    let mut s = vec!["all_surgeries".to_string()];
    s.extend(SURGERY_TYPES.iter().map(|v| v.to_string()));
    s
}

fn default_outcomes() -> Vec<OutcomeKind> {
    OutcomeKind::ALL.to_vec()
}

fn default_families() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}

fn default_cv_folds() -> usize {
    5
}

fn default_bootstrap_b() -> usize {
    100
}

fn default_test_frac() -> f64 {
    0.2
}

fn default_top_k() -> usize {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

/// Full run configuration. Unset JSON fields take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantKind>,
    #[serde(default = "default_surgeries")]
    pub surgeries: Vec<String>,
    #[serde(default = "default_outcomes")]
    pub outcomes: Vec<OutcomeKind>,
    #[serde(default = "default_families")]
    pub families: Vec<ModelFamily>,
    /// Per-family grid overrides; families not listed use the pinned
    /// default grids.
    #[serde(default)]
    pub grids: BTreeMap<String, Vec<Hyperparams>>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    #[serde(default = "default_test_frac")]
    pub test_frac: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 = library default. Results never depend on it.
    #[serde(default)]
    pub jobs: usize,
}

impl RunConfig {
    pub fn synthetic(n_per_group: usize, seed: u64, out_dir: PathBuf) -> Self {
        RunConfig {
            input: InputSource::Synthetic { n_per_group },
            seed,
            variants: default_variants(),
            surgeries: default_surgeries(),
            outcomes: default_outcomes(),
            families: default_families(),
            grids: BTreeMap::new(),
            cv_folds: default_cv_folds(),
            bootstrap_b: default_bootstrap_b(),
            test_frac: default_test_frac(),
            top_k: default_top_k(),
            out_dir,
            jobs: 0,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn grid_for(&self, family: ModelFamily) -> Vec<Hyperparams> {
        self.grids
            .get(family.name())
            .cloned()
            .unwrap_or_else(|| default_grid(family))
    }

    /// The (surgery, outcome) cells this config requests, with skip
    /// reasons attached where a combination is ruled out.
    pub fn cells(&self) -> Vec<(String, OutcomeKind, Option<String>)> {
        let mut out = Vec::new();
        for surgery in &self.surgeries {
            for &outcome in &self.outcomes {
                let skip = if outcome == OutcomeKind::Mortality1y && surgery != "all_surgeries" {
                    Some(
                        "mortality is classified only on the pooled cohort: single-surgery \
                         event counts are too low to stratify folds and the hold-out test set"
                            .to_string(),
                    )
                } else {
                    None
                };
                out.push((surgery.clone(), outcome, skip));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let registry = default_registry();
        for s in &self.surgeries {
            SurgeryFilter::parse(s, &registry)?;
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be >= 2".to_string()));
        }
        if self.bootstrap_b < 1 {
            return Err(Error::Config("bootstrap_b must be >= 1".to_string()));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(Error::Config("test_frac must lie in (0, 1)".to_string()));
        }
        if self.variants.is_empty() || self.families.is_empty() {
            return Err(Error::Config(
                "variants and families must be non-empty".to_string(),
            ));
        }
        if let InputSource::Synthetic { n_per_group } = self.input {
            if n_per_group < 50 {
                return Err(Error::Config(
                    "synthetic cohorts need n_per_group >= 50".to_string(),
                ));
            }
        }
        for name in self.grids.keys() {
            ModelFamily::parse(name)?;
        }
        if self.cells().iter().all(|(_, _, skip)| skip.is_some()) {
            return Err(Error::Config(
                "no runnable (surgery, outcome) cell: mortality cannot be classified on \
                 individual surgeries"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// FNV-1a derivation of purpose-specific seeds from the master seed.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master.rotate_left(17);
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ master
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One trained-and-evaluated competitor inside a cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub family: ModelFamily,
    pub variant: VariantKind,
    pub hp: Hyperparams,
    pub metrics: MetricCI,
    pub n0: usize,
    pub n1: usize,
    pub fit_cost: f64,
}

/// The winning row of one (surgery, outcome) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellBest {
    pub variant: VariantKind,
    pub family: ModelFamily,
    pub hp: Hyperparams,
    pub metrics: MetricCI,
    pub n0: usize,
    pub n1: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub surgery: String,
    pub outcome: OutcomeKind,
    pub skipped: Option<String>,
    pub error: Option<String>,
    /// Best family per variant (the supplemental-table rows).
    pub variant_rows: Vec<FamilyOutcome>,
    pub best: Option<CellBest>,
    pub disruptions: Vec<Disruption>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub master_seed: u64,
    pub cells: Vec<CellStatus>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStatus {
    pub surgery: String,
    pub outcome: OutcomeKind,
    pub status: String,
    pub detail: Option<String>,
    pub seconds: f64,
}

pub struct RunSummary {
    pub cells: Vec<CellResult>,
    pub any_failed: bool,
}

/// Builds or loads the cohort backing one surgery scope.
pub fn acquire_cohort(config: &RunConfig, surgery: &str) -> Result<(Cohort, Option<GenProfile>)> {
    let registry = default_registry();
    let filter = SurgeryFilter::parse(surgery, &registry)?;
    match &config.input {
        InputSource::Synthetic { n_per_group } => {
            let seed = derive_seed(config.seed, &format!("synth/{surgery}"));
            let profile = default_profile(filter, *n_per_group, seed)?;
            let cohort = sample_cohort(&profile)?;
            Ok((cohort, Some(profile)))
        }
        InputSource::CohortCsv { path } => {
            let cohort = load_cohort(path, &registry)?;
            let rows: Vec<crate::data::Row> = cohort
                .rows
                .iter()
                .filter(|r| filter.includes(&r.surgery))
                .cloned()
                .collect();
            if rows.is_empty() {
                return Err(Error::EmptyInput(format!(
                    "no rows for surgery scope {surgery}"
                )));
            }
            Ok((
                Cohort {
                    registry: cohort.registry,
                    rows,
                },
                None,
            ))
        }
    }
}

/// Filter + binarize + encode + split for one (cohort, variant, outcome):
/// everything a model needs, rows aligned across the pieces.
pub struct PreparedVariant {
    pub variant: DatasetVariant,
    pub x: EncodedMatrix,
    pub labels: LabelVector,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn prepare_variant(
    cohort: &Cohort,
    surgery: &str,
    kind: VariantKind,
    outcome: OutcomeKind,
    test_frac: f64,
    seed: u64,
) -> Result<PreparedVariant> {
    let registry = default_registry();
    let filter = SurgeryFilter::parse(surgery, &registry)?;
    let variant = DatasetVariant::new(kind, filter);
    let (complete, _report) = filter_complete(cohort, &variant, outcome);
    if complete.n_rows() == 0 {
        return Err(Error::EmptyInput(format!(
            "no complete rows for {surgery}/{}/{}",
            kind.name(),
            outcome.name()
        )));
    }
    let labels = binarize_outcome(&complete, outcome)?;
    let kept = Cohort {
        registry: complete.registry.clone(),
        rows: labels
            .kept_rows
            .iter()
            .map(|&i| complete.rows[i].clone())
            .collect(),
    };
    let (train_idx, test_idx) = train_test_split(&labels.y, test_frac, seed)?;
    let train_cohort = Cohort {
        registry: kept.registry.clone(),
        rows: train_idx.iter().map(|&i| kept.rows[i].clone()).collect(),
    };
    let pair = encode(&train_cohort, &kept, &variant)?;
    Ok(PreparedVariant {
        variant,
        x: pair.applied,
        labels,
        train_idx,
        test_idx,
        warnings: pair.warnings,
    })
}

struct EvaluatedFamily {
    outcome_row: FamilyOutcome,
    model: TrainedModel,
    scores: Vec<f64>,
}

/// Grid-search, refit, and bootstrap-evaluate one family on one prepared
/// variant.
fn evaluate_family(
    prepared: &PreparedVariant,
    family: ModelFamily,
    grid: &[Hyperparams],
    cv_folds: usize,
    bootstrap_b: usize,
    seed: u64,
) -> Result<EvaluatedFamily> {
    let y_train: Vec<u8> = prepared
        .train_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();
    let y_test: Vec<u8> = prepared
        .test_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();
    let x_train = prepared.x.subset_rows(&prepared.train_idx);
    let x_test = prepared.x.subset_rows(&prepared.test_idx);

    let plan = stratified_kfold(&y_train, cv_folds, derive_seed(seed, "folds"))?;
    let (best_hp, _results) =
        grid_search(grid, &x_train, &y_train, &plan, derive_seed(seed, "grid"))?;
    let model = fit(&best_hp, &x_train, &y_train, derive_seed(seed, "fit"))?;
    let scores = model.predict_proba(&x_test)?;
    let metrics = bootstrap_ci(
        &scores,
        &y_test,
        bootstrap_b,
        derive_seed(seed, "bootstrap"),
    )?;
    let fit_cost = fit_cost_estimate(&best_hp, x_train.n_rows(), x_train.n_cols());

    Ok(EvaluatedFamily {
        outcome_row: FamilyOutcome {
            family,
            variant: prepared.variant.kind,
            hp: best_hp,
            metrics,
            n0: prepared.labels.n_neg(),
            n1: prepared.labels.n_pos(),
            fit_cost,
        },
        model,
        scores,
    })
}

/// Runs one (surgery, outcome) cell end to end and writes its artifacts
/// under `cell_dir` (when provided).
pub fn run_cell(
    cohort: &Cohort,
    surgery: &str,
    outcome: OutcomeKind,
    config: &RunConfig,
    cell_dir: Option<&Path>,
) -> Result<CellResult> {
    let start = std::time::Instant::now();
    let cell_seed = derive_seed(config.seed, &format!("cell/{surgery}/{}", outcome.name()));
    let mut warnings = Vec::new();
    let mut all_candidates: Vec<(Candidate, usize)> = Vec::new();
    let mut evaluated: Vec<EvaluatedFamily> = Vec::new();
    let mut prepared_by_variant: Vec<PreparedVariant> = Vec::new();
    let mut variant_rows = Vec::new();

    for &kind in &config.variants {
        let vseed = derive_seed(cell_seed, &format!("variant/{}", kind.name()));
        let prepared = prepare_variant(
            cohort,
            surgery,
            kind,
            outcome,
            config.test_frac,
            derive_seed(vseed, "split"),
        )?;
        warnings.extend(prepared.warnings.iter().cloned());

        let mut variant_candidates: Vec<(Candidate, usize)> = Vec::new();
        for &family in &config.families {
            let fseed = derive_seed(vseed, &format!("family/{}", family.name()));
            let grid = config.grid_for(family);
            match evaluate_family(
                &prepared,
                family,
                &grid,
                config.cv_folds,
                config.bootstrap_b,
                fseed,
            ) {
                Ok(result) => {
                    let candidate = Candidate {
                        family,
                        variant: kind,
                        hp: result.outcome_row.hp.clone(),
                        metrics: result.outcome_row.metrics.clone(),
                        fit_cost: result.outcome_row.fit_cost,
                    };
                    let idx = evaluated.len();
                    evaluated.push(result);
                    variant_candidates.push((candidate.clone(), idx));
                    all_candidates.push((candidate, idx));
                }
                Err(e) => {
                    warnings.push(format!(
                        "{}/{} on {surgery}: {e}",
                        family.name(),
                        kind.name()
                    ));
                }
            }
        }

        if !variant_candidates.is_empty() {
            let sel = select_best(
                &variant_candidates
                    .iter()
                    .map(|(c, _)| c.clone())
                    .collect::<Vec<_>>(),
            )?;
            let (_, idx) = variant_candidates[sel.winner_index];
            variant_rows.push(evaluated[idx].outcome_row.clone());
        }
        prepared_by_variant.push(prepared);
    }

    if all_candidates.is_empty() {
        return Err(Error::Degenerate(format!(
            "every family failed on {surgery}/{}: {}",
            outcome.name(),
            warnings.join(" | ")
        )));
    }

    let sel = select_best(
        &all_candidates
            .iter()
            .map(|(c, _)| c.clone())
            .collect::<Vec<_>>(),
    )?;
    let (winner_candidate, winner_idx) = all_candidates[sel.winner_index].clone();
    let winner = &evaluated[winner_idx];
    let prepared = prepared_by_variant
        .iter()
        .find(|p| p.variant.kind == winner_candidate.variant)
        .expect("winner variant prepared");

    // Attribution on the winner over (capped) test rows; background from
    // the training split.
    let shap_seed = derive_seed(cell_seed, "shap");
    let x_train = prepared.x.subset_rows(&prepared.train_idx);
    let x_test = prepared.x.subset_rows(&prepared.test_idx);
    let x_explain = background_sample(&x_test, 1000, derive_seed(shap_seed, "rows"));
    let background = background_sample(&x_train, 1000, derive_seed(shap_seed, "background"));
    let n_samples = (2 * prepared.x.n_cols()).max(64);
    let shap = explain_model(&winner.model, &x_explain, &background, n_samples, shap_seed)?;
    let impacts = rank_impacts(&shap, &x_explain, config.top_k);

    // Baseline correlation structure of the surgery cohort, then the
    // disruption scan against the winner's attribution directionality.
    let corr = intraop_pearson(cohort)?;
    let network = build_network(&corr);
    let disruptions = disruption_report(&network, &impacts);

    let best = CellBest {
        variant: winner_candidate.variant,
        family: winner_candidate.family,
        hp: winner_candidate.hp.clone(),
        metrics: winner_candidate.metrics.clone(),
        n0: winner.outcome_row.n0,
        n1: winner.outcome_row.n1,
    };

    if let Some(dir) = cell_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        write_atomic(&dir.join("model.json"), winner.model.to_json()?.as_bytes())?;
        write_atomic(
            &dir.join("impacts.json"),
            serde_json::to_string_pretty(&impacts)?.as_bytes(),
        )?;
        shap.write_csv(&dir.join("shap.csv"))?;
        let title = format!("{surgery} / {} / {}", outcome.name(), best.family.name());
        write_atomic(
            &dir.join("shap_beeswarm.svg"),
            beeswarm_svg(&shap, &x_explain, &impacts, &title).as_bytes(),
        )?;
        corr.write_csv(&dir.join("corr_matrix.csv"))?;
        write_atomic(
            &dir.join("corr_heatmap.svg"),
            heatmap_svg(&corr, &format!("{surgery} intraoperative correlations")).as_bytes(),
        )?;
        write_atomic(
            &dir.join("corr_network.svg"),
            network_svg(&network, &format!("{surgery} correlation network")).as_bytes(),
        )?;
        write_atomic(
            &dir.join("disruptions.json"),
            serde_json::to_string_pretty(&disruptions)?.as_bytes(),
        )?;
        write_atomic(
            &dir.join("scores.json"),
            serde_json::to_string(&winner.scores)?.as_bytes(),
        )?;
        write_atomic(
            &dir.join("variant_metrics.csv"),
            variant_rows_csv(surgery, outcome, &variant_rows).as_bytes(),
        )?;
    }

    Ok(CellResult {
        surgery: surgery.to_string(),
        outcome,
        skipped: None,
        error: None,
        variant_rows,
        best: Some(best),
        disruptions,
        warnings,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// The pinned column layout of the run-level metrics table.
pub const METRICS_CSV_COLUMNS: [&str; 24] = [
    "surgery",
    "outcome",
    "dataset",
    "n0",
    "n1",
    "model",
    "auc",
    "auc_lo95",
    "auc_hi95",
    "accuracy",
    "accuracy_lo95",
    "accuracy_hi95",
    "f1",
    "f1_lo95",
    "f1_hi95",
    "precision",
    "precision_lo95",
    "precision_hi95",
    "sensitivity",
    "sensitivity_lo95",
    "sensitivity_hi95",
    "specificity",
    "specificity_lo95",
    "specificity_hi95",
];

fn metric_fields(metrics: &MetricCI) -> Vec<String> {
    let mut out = Vec::new();
    for name in [
        "auroc",
        "accuracy",
        "f1",
        "precision",
        "sensitivity",
        "specificity",
    ] {
        match metrics.entry(name) {
            Some(e) => {
                out.push(format!("{}", e.point));
                out.push(format!("{}", e.lo95));
                out.push(format!("{}", e.hi95));
            }
            None => {
                out.push(String::new());
                out.push(String::new());
                out.push(String::new());
            }
        }
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    fields.join(",")
}

fn best_row_fields(cell: &CellResult) -> Option<Vec<String>> {
    let best = cell.best.as_ref()?;
    let mut fields = vec![
        cell.surgery.clone(),
        cell.outcome.name().to_string(),
        best.variant.name().to_string(),
        best.n0.to_string(),
        best.n1.to_string(),
        best.family.name().to_string(),
    ];
    fields.extend(metric_fields(&best.metrics));
    Some(fields)
}

/// Table of winning rows, one per successful cell.
pub fn metrics_csv(cells: &[CellResult]) -> String {
    let mut out = String::new();
    out.push_str(&csv_line(
        &METRICS_CSV_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    ));
    out.push('\n');
    for cell in cells {
        if let Some(fields) = best_row_fields(cell) {
            out.push_str(&csv_line(&fields));
            out.push('\n');
        }
    }
    out
}

fn variant_rows_csv(surgery: &str, outcome: OutcomeKind, rows: &[FamilyOutcome]) -> String {
    let mut out = String::new();
    out.push_str(&csv_line(
        &METRICS_CSV_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    ));
    out.push('\n');
    for row in rows {
        let mut fields = vec![
            surgery.to_string(),
            outcome.name().to_string(),
            row.variant.name().to_string(),
            row.n0.to_string(),
            row.n1.to_string(),
            row.family.name().to_string(),
        ];
        fields.extend(metric_fields(&row.metrics));
        out.push_str(&csv_line(&fields));
        out.push('\n');
    }
    out
}

pub const WINNERS_CSV_COLUMNS: [&str; 5] = [
    "surgery",
    "outcome",
    "intra_op",
    "peri_op",
    "peri_op_cognitive",
];

/// Variant-winner matrix: a check mark in the winning dataset column.
pub fn variant_winners_csv(cells: &[CellResult]) -> String {
    let mut out = String::new();
    out.push_str(&csv_line(
        &WINNERS_CSV_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    ));
    out.push('\n');
    for cell in cells {
        let Some(best) = &cell.best else { continue };
        let mark = |k: VariantKind| {
            if best.variant == k {
                "\u{2713}".to_string()
            } else {
                String::new()
            }
        };
        let fields = vec![
            cell.surgery.clone(),
            cell.outcome.name().to_string(),
            mark(VariantKind::IntraOp),
            mark(VariantKind::PeriOp),
            mark(VariantKind::PeriOpCognitive),
        ];
        out.push_str(&csv_line(&fields));
        out.push('\n');
    }
    out
}

/// Runs every requested cell, writes the report bundle, and returns the
/// per-cell results in config order.
pub fn run_all(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let start = std::time::Instant::now();
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    // Acquire one cohort per surgery scope up front (and persist synthetic
    // sources next to the results).
    let cohort_dir = out_dir.join("cohorts");
    std::fs::create_dir_all(&cohort_dir)
        .map_err(|e| Error::io(cohort_dir.display().to_string(), e))?;
    let mut cohorts: BTreeMap<String, Cohort> = BTreeMap::new();
    for surgery in &config.surgeries {
        let (cohort, profile) = acquire_cohort(config, surgery)?;
        if let Some(profile) = &profile {
            write_cohort_csv(&cohort, &cohort_dir.join(format!("{surgery}.csv")))?;
            write_profile_json(profile, &cohort_dir.join(format!("{surgery}.profile.json")))?;
        }
        cohorts.insert(surgery.clone(), cohort);
    }

    let cells_spec = config.cells();
    let results: Vec<CellResult> = cells_spec
        .par_iter()
        .map(|(surgery, outcome, skip)| {
            if let Some(reason) = skip {
                return CellResult {
                    surgery: surgery.clone(),
                    outcome: *outcome,
                    skipped: Some(reason.clone()),
                    error: None,
                    variant_rows: vec![],
                    best: None,
                    disruptions: vec![],
                    warnings: vec![],
                    seconds: 0.0,
                };
            }
            let cell_dir = out_dir
                .join("cells")
                .join(format!("{surgery}__{}", outcome.name()));
            let cohort = &cohorts[surgery];
            match run_cell(cohort, surgery, *outcome, config, Some(&cell_dir)) {
                Ok(result) => result,
                Err(e) => CellResult {
                    surgery: surgery.clone(),
                    outcome: *outcome,
                    skipped: None,
                    error: Some(e.to_string()),
                    variant_rows: vec![],
                    best: None,
                    disruptions: vec![],
                    warnings: vec![],
                    seconds: 0.0,
                },
            }
        })
        .collect();

    write_atomic(
        &out_dir.join("metrics.csv"),
        metrics_csv(&results).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("variant_winners.csv"),
        variant_winners_csv(&results).as_bytes(),
    )?;

    let disruption_reports: Vec<crate::netcorr::DisruptionReport> = results
        .iter()
        .map(|cell| crate::netcorr::DisruptionReport {
            surgery: cell.surgery.clone(),
            outcome: Some(cell.outcome),
            disruptions: cell.disruptions.clone(),
        })
        .collect();
    write_atomic(
        &out_dir.join("disruptions.json"),
        serde_json::to_string_pretty(&disruption_reports)?.as_bytes(),
    )?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        master_seed: config.seed,
        cells: results
            .iter()
            .map(|c| CellStatus {
                surgery: c.surgery.clone(),
                outcome: c.outcome,
                status: if c.error.is_some() {
                    "failed".to_string()
                } else if c.skipped.is_some() {
                    "skipped".to_string()
                } else {
                    "ok".to_string()
                },
                detail: c.error.clone().or_else(|| c.skipped.clone()),
                seconds: c.seconds,
            })
            .collect(),
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_atomic(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;

    let any_failed = results.iter().any(|c| c.error.is_some());
    Ok(RunSummary {
        cells: results,
        any_failed,
    })
}

/// Renders a run directory into one human-readable Markdown page.
pub fn render_report(run_dir: &Path) -> Result<String> {
    let manifest_path = run_dir.join("manifest.json");
    let manifest: RunManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?,
    )?;

    let mut missing = Vec::new();
    let read = |name: &str, missing: &mut Vec<String>| -> String {
        match std::fs::read_to_string(run_dir.join(name)) {
            Ok(s) => s,
            Err(_) => {
                missing.push(name.to_string());
                String::new()
            }
        }
    };
    let metrics = read("metrics.csv", &mut missing);
    let winners = read("variant_winners.csv", &mut missing);
    let disruptions = read("disruptions.json", &mut missing);

    let mut md = String::new();
    md.push_str("# Perioperative outcome modeling report\n\n");
    md.push_str(&format!(
        "Master seed {}; {} cells; total {:.1}s.\n\n",
        manifest.master_seed,
        manifest.cells.len(),
        manifest.total_seconds
    ));

    md.push_str("## Best model per surgery and outcome\n\n");
    md.push_str(&csv_to_md_table(&metrics, &[0, 1, 2, 3, 4, 5, 6, 7, 8]));
    md.push_str("\n## Winning dataset variant\n\n");
    md.push_str(&csv_to_md_table(&winners, &[0, 1, 2, 3, 4]));

    md.push_str("\n## Cell status\n\n");
    for cell in &manifest.cells {
        match cell.status.as_str() {
            "ok" => md.push_str(&format!(
                "- `{}` / `{}`: ok ({:.1}s) -- artifacts in `cells/{}__{}/`\n",
                cell.surgery,
                cell.outcome.name(),
                cell.seconds,
                cell.surgery,
                cell.outcome.name()
            )),
            "skipped" => md.push_str(&format!(
                "- `{}` / `{}`: SKIPPED -- {}\n",
                cell.surgery,
                cell.outcome.name(),
                cell.detail.as_deref().unwrap_or("no reason recorded")
            )),
            _ => md.push_str(&format!(
                "- `{}` / `{}`: FAILED -- {}\n",
                cell.surgery,
                cell.outcome.name(),
                cell.detail.as_deref().unwrap_or("no detail")
            )),
        }
    }

    md.push_str("\n## Disruption findings\n\n");
    if disruptions.trim().is_empty() || disruptions.trim() == "[]" {
        md.push_str("No disruption reports.\n");
    } else {
        md.push_str("```json\n");
        md.push_str(disruptions.trim());
        md.push_str("\n```\n");
    }

    if !missing.is_empty() {
        md.push_str("\n## Missing artifacts\n\n");
        for m in &missing {
            md.push_str(&format!("- `{m}` not found\n"));
        }
    }
    Ok(md)
}

fn csv_to_md_table(csv: &str, keep_cols: &[usize]) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let row: Vec<&str> = keep_cols
            .iter()
            .map(|&c| fields.get(c).copied().unwrap_or(""))
            .collect();
        out.push_str(&format!("| {} |\n", row.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(keep_cols.len())));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        let a = derive_seed(42, "cell/urology/los");
        let b = derive_seed(42, "cell/urology/los");
        let c = derive_seed(42, "cell/urology/charges");
        let d = derive_seed(43, "cell/urology/los");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn config_cells_skip_single_surgery_mortality() {
        let mut config = RunConfig::synthetic(100, 1, PathBuf::from("/tmp/x"));
        config.surgeries = vec!["all_surgeries".into(), "orthopedics".into()];
        config.outcomes = vec![OutcomeKind::Los, OutcomeKind::Mortality1y];
        let cells = config.cells();
        assert_eq!(cells.len(), 4);
        let skipped: Vec<_> = cells.iter().filter(|(_, _, s)| s.is_some()).collect();
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].0, "orthopedics");
        assert_eq!(skipped[0].1, OutcomeKind::Mortality1y);
    }

    #[test]
    fn config_with_only_invalid_cells_is_rejected() {
        let mut config = RunConfig::synthetic(100, 1, PathBuf::from("/tmp/x"));
        config.surgeries = vec!["orthopedics".into()];
        config.outcomes = vec![OutcomeKind::Mortality1y];
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_surgery_and_bad_fractions() {
        let mut config = RunConfig::synthetic(100, 1, PathBuf::from("/tmp/x"));
        config.surgeries = vec!["podiatry".into()];
        assert!(config.validate().is_err());

        let mut config = RunConfig::synthetic(100, 1, PathBuf::from("/tmp/x"));
        config.test_frac = 1.5;
        assert!(config.validate().is_err());
    }

    #[test]
    fn sparse_config_json_takes_defaults() {
        let json = r#"{"input": {"kind": "synthetic", "n_per_group": 500}, "seed": 9}"#;
        let config: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.cv_folds, 5);
        assert_eq!(config.bootstrap_b, 100);
        assert_eq!(config.variants.len(), 3);
        assert_eq!(config.surgeries.len(), 7);
        assert_eq!(config.families.len(), 7);
        config.validate().unwrap();
    }

    #[test]
    fn metrics_csv_columns_are_pinned() {
        let header = metrics_csv(&[]);
        assert_eq!(
            header.trim(),
            METRICS_CSV_COLUMNS.join(","),
            "metrics.csv header drifted"
        );
    }
}

/// Seed for one (surgery, outcome, variant) slot, shared by the `train`,
/// `evaluate`, and `explain` verbs so they re-derive identical splits.
pub fn variant_seed(
    config_seed: u64,
    surgery: &str,
    outcome: OutcomeKind,
    kind: VariantKind,
) -> u64 {
    let cell_seed = derive_seed(config_seed, &format!("cell/{surgery}/{}", outcome.name()));
    derive_seed(cell_seed, &format!("variant/{}", kind.name()))
}

/// Result of training one (surgery, outcome, variant) slot.
pub struct SingleTraining {
    pub prepared: PreparedVariant,
    /// Every family that completed, in config order.
    pub rows: Vec<FamilyOutcome>,
    pub winner: FamilyOutcome,
    pub model: TrainedModel,
    /// Winner's test-set scores, aligned with `prepared.test_idx`.
    pub scores: Vec<f64>,
}

/// Grid-searches every configured family on one variant and returns the
/// selected winner with its fitted model.
pub fn train_single(
    cohort: &Cohort,
    surgery: &str,
    outcome: OutcomeKind,
    kind: VariantKind,
    config: &RunConfig,
) -> Result<SingleTraining> {
    let vseed = variant_seed(config.seed, surgery, outcome, kind);
    let prepared = prepare_variant(
        cohort,
        surgery,
        kind,
        outcome,
        config.test_frac,
        derive_seed(vseed, "split"),
    )?;

    let mut rows = Vec::new();
    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for &family in &config.families {
        let fseed = derive_seed(vseed, &format!("family/{}", family.name()));
        let grid = config.grid_for(family);
        match evaluate_family(
            &prepared,
            family,
            &grid,
            config.cv_folds,
            config.bootstrap_b,
            fseed,
        ) {
            Ok(result) => {
                rows.push(result.outcome_row.clone());
                fitted.push(result);
            }
            Err(e) => failures.push(format!("{}: {e}", family.name())),
        }
    }
    if fitted.is_empty() {
        return Err(Error::Degenerate(format!(
            "every family failed on {surgery}/{}/{}: {}",
            kind.name(),
            outcome.name(),
            failures.join(" | ")
        )));
    }
    let candidates: Vec<Candidate> = fitted
        .iter()
        .map(|f| Candidate {
            family: f.outcome_row.family,
            variant: kind,
            hp: f.outcome_row.hp.clone(),
            metrics: f.outcome_row.metrics.clone(),
            fit_cost: f.outcome_row.fit_cost,
        })
        .collect();
    let sel = select_best(&candidates)?;
    let chosen = fitted.swap_remove(sel.winner_index);
    Ok(SingleTraining {
        prepared,
        rows,
        winner: chosen.outcome_row,
        model: chosen.model,
        scores: chosen.scores,
    })
}
