//! Command-line entry point for the perioperative outcome modeling toolkit.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors, 3 when
//! some pipeline cells failed while others completed.

use clap::{Parser, Subcommand};
use periaiims::data::{default_registry, OutcomeKind, SurgeryFilter, VariantKind};
use periaiims::error::Error;
use periaiims::eval::bootstrap_ci;
use periaiims::explain::{background_sample, explain_model, rank_impacts};
use periaiims::ingest::write_cohort_csv;
use periaiims::models::TrainedModel;
use periaiims::netcorr::{build_network, intraop_pearson};
use periaiims::pipeline::{
    acquire_cohort, derive_seed, prepare_variant, render_report, run_all, train_single,
    variant_seed, RunConfig,
};
use periaiims::svg::{beeswarm_svg, heatmap_svg, network_svg};
use periaiims::synth::write_profile_json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "periaiims",
    about = "Perioperative outcome modeling: synthetic cohorts, a classifier zoo with \
             cross-validated selection, bootstrap metrics, Shapley explanations, and \
             correlation-network disruption analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration JSON; defaults to a synthetic run when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (also settable via PERIAIIMS_SEED, which wins).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = automatic). Never changes results.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Surgery scope: all_surgeries or one group.
    #[arg(long, global = true)]
    surgery: Option<String>,

    /// Outcome: los | charges | mortality_1y | avg_pain.
    #[arg(long, global = true)]
    outcome: Option<String>,

    /// Dataset variant: intra_op | peri_op | peri_op_cognitive.
    #[arg(long, global = true)]
    variant: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cohort CSVs with profile sidecars.
    Synth,
    /// Cross-validated grid search on one (surgery, outcome, variant);
    /// writes the selected model.
    Train,
    /// Score the trained model on its held-out test split with bootstrap
    /// confidence intervals.
    Evaluate,
    /// Shapley attributions, top-k impacts, and the beeswarm summary for
    /// the trained model.
    Explain,
    /// Correlation matrix, heatmap, and network for one surgery scope.
    Corr,
    /// Render a completed run directory as Markdown.
    Report,
    /// The whole pipeline over every configured cell.
    RunAll,
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::synthetic(1000, 0, PathBuf::from("runs/out")),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Ok(env_seed) = std::env::var("PERIAIIMS_SEED") {
        config.seed = env_seed.parse().map_err(|_| {
            Error::Config(format!(
                "PERIAIIMS_SEED must be an integer, got {env_seed:?}"
            ))
        })?;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if let Some(surgery) = &cli.surgery {
        SurgeryFilter::parse(surgery, &default_registry())?;
        config.surgeries = vec![surgery.clone()];
    }
    if let Some(outcome) = &cli.outcome {
        config.outcomes = vec![OutcomeKind::parse(outcome)?];
    }
    if let Some(variant) = &cli.variant {
        config.variants = vec![VariantKind::parse(variant)?];
    }
    config.validate()?;
    if config.jobs > 0 {
        // The global pool can only be set once per process; later calls
        // are a no-op.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global();
    }
    Ok(config)
}

fn ensure_dir(dir: &std::path::Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn single_slot(config: &RunConfig) -> Result<(String, OutcomeKind, VariantKind), Error> {
    let surgery = config.surgeries[0].clone();
    let outcome = config.outcomes[0];
    let variant = config.variants[0];
    if outcome == OutcomeKind::Mortality1y && surgery != "all_surgeries" {
        return Err(Error::Config(
            "mortality is classified only on the pooled cohort".to_string(),
        ));
    }
    Ok((surgery, outcome, variant))
}

fn cmd_synth(config: &RunConfig) -> Result<(), Error> {
    let dir = config.out_dir.join("cohorts");
    ensure_dir(&dir)?;
    for surgery in &config.surgeries {
        let (cohort, profile) = acquire_cohort(config, surgery)?;
        let profile = profile
            .ok_or_else(|| Error::Config("synth requires a synthetic input source".to_string()))?;
        let csv_path = dir.join(format!("{surgery}.csv"));
        write_cohort_csv(&cohort, &csv_path)?;
        write_profile_json(&profile, &dir.join(format!("{surgery}.profile.json")))?;
        println!("wrote {} ({} rows)", csv_path.display(), cohort.n_rows());
    }
    Ok(())
}

fn cmd_train(config: &RunConfig) -> Result<(), Error> {
    let (surgery, outcome, variant) = single_slot(config)?;
    let (cohort, _) = acquire_cohort(config, &surgery)?;
    let training = train_single(&cohort, &surgery, outcome, variant, config)?;
    ensure_dir(&config.out_dir)?;
    std::fs::write(config.out_dir.join("model.json"), training.model.to_json()?)
        .map_err(|e| Error::io("model.json".to_string(), e))?;
    let summary = serde_json::json!({
        "surgery": surgery,
        "outcome": outcome.name(),
        "variant": variant.name(),
        "winner": training.winner,
        "families": training.rows,
        "n_train": training.prepared.train_idx.len(),
        "n_test": training.prepared.test_idx.len(),
    });
    std::fs::write(
        config.out_dir.join("train_summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )
    .map_err(|e| Error::io("train_summary.json".to_string(), e))?;
    println!(
        "selected {} on {}/{}/{} -> {}",
        training.winner.family.name(),
        surgery,
        outcome.name(),
        variant.name(),
        config.out_dir.join("model.json").display()
    );
    Ok(())
}

fn load_model(config: &RunConfig) -> Result<TrainedModel, Error> {
    let path = config.out_dir.join("model.json");
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    TrainedModel::from_json(&text)
}

fn cmd_evaluate(config: &RunConfig) -> Result<(), Error> {
    let (surgery, outcome, variant) = single_slot(config)?;
    let (cohort, _) = acquire_cohort(config, &surgery)?;
    let vseed = variant_seed(config.seed, &surgery, outcome, variant);
    let prepared = prepare_variant(
        &cohort,
        &surgery,
        variant,
        outcome,
        config.test_frac,
        derive_seed(vseed, "split"),
    )?;
    let model = load_model(config)?;
    let x_test = prepared.x.subset_rows(&prepared.test_idx);
    let y_test: Vec<u8> = prepared
        .test_idx
        .iter()
        .map(|&i| prepared.labels.y[i])
        .collect();
    let scores = model.predict_proba(&x_test)?;
    let seed = derive_seed(
        derive_seed(vseed, &format!("family/{}", model.family().name())),
        "bootstrap",
    );
    let metrics = bootstrap_ci(&scores, &y_test, config.bootstrap_b, seed)?;
    std::fs::write(
        config.out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?,
    )
    .map_err(|e| Error::io("metrics.json".to_string(), e))?;
    if let Some(auc) = metrics.auroc {
        println!(
            "test AUROC {:.4} (95% CI {:.4} - {:.4}) over {} rows",
            auc.point,
            auc.lo95,
            auc.hi95,
            y_test.len()
        );
    }
    println!("wrote {}", config.out_dir.join("metrics.json").display());
    Ok(())
}

fn cmd_explain(config: &RunConfig) -> Result<(), Error> {
    let (surgery, outcome, variant) = single_slot(config)?;
    let (cohort, _) = acquire_cohort(config, &surgery)?;
    let vseed = variant_seed(config.seed, &surgery, outcome, variant);
    let prepared = prepare_variant(
        &cohort,
        &surgery,
        variant,
        outcome,
        config.test_frac,
        derive_seed(vseed, "split"),
    )?;
    let model = load_model(config)?;
    let shap_seed = derive_seed(vseed, "shap");
    let x_train = prepared.x.subset_rows(&prepared.train_idx);
    let x_test = prepared.x.subset_rows(&prepared.test_idx);
    let x_explain = background_sample(&x_test, 1000, derive_seed(shap_seed, "rows"));
    let background = background_sample(&x_train, 1000, derive_seed(shap_seed, "background"));
    let n_samples = (2 * prepared.x.n_cols()).max(64);
    let shap = explain_model(&model, &x_explain, &background, n_samples, shap_seed)?;
    let impacts = rank_impacts(&shap, &x_explain, config.top_k);

    ensure_dir(&config.out_dir)?;
    shap.write_csv(&config.out_dir.join("shap.csv"))?;
    std::fs::write(
        config.out_dir.join("impacts.json"),
        serde_json::to_string_pretty(&impacts)?,
    )
    .map_err(|e| Error::io("impacts.json".to_string(), e))?;
    let title = format!("{surgery} / {} / {}", outcome.name(), model.family().name());
    std::fs::write(
        config.out_dir.join("shap_beeswarm.svg"),
        beeswarm_svg(&shap, &x_explain, &impacts, &title),
    )
    .map_err(|e| Error::io("shap_beeswarm.svg".to_string(), e))?;
    for imp in &impacts {
        println!(
            "{:>24}  mean|phi| {:.5}  directionality {:+.3}",
            imp.name, imp.mean_abs_phi, imp.directionality
        );
    }
    println!(
        "wrote {}",
        config.out_dir.join("shap_beeswarm.svg").display()
    );
    Ok(())
}

fn cmd_corr(config: &RunConfig) -> Result<(), Error> {
    ensure_dir(&config.out_dir)?;
    for surgery in &config.surgeries {
        let (cohort, _) = acquire_cohort(config, surgery)?;
        let corr = intraop_pearson(&cohort)?;
        let network = build_network(&corr);
        corr.write_csv(&config.out_dir.join(format!("{surgery}_corr.csv")))?;
        std::fs::write(
            config.out_dir.join(format!("{surgery}_corr_heatmap.svg")),
            heatmap_svg(&corr, &format!("{surgery} intraoperative correlations")),
        )
        .map_err(|e| Error::io("corr_heatmap.svg".to_string(), e))?;
        std::fs::write(
            config.out_dir.join(format!("{surgery}_corr_network.svg")),
            network_svg(&network, &format!("{surgery} correlation network")),
        )
        .map_err(|e| Error::io("corr_network.svg".to_string(), e))?;
        std::fs::write(
            config.out_dir.join(format!("{surgery}_network.json")),
            serde_json::to_string_pretty(&network)?,
        )
        .map_err(|e| Error::io("network.json".to_string(), e))?;
        println!(
            "{surgery}: {} nodes, {} non-negligible edges",
            network.nodes.len(),
            network.edges.len()
        );
    }
    Ok(())
}

fn cmd_report(config: &RunConfig) -> Result<(), Error> {
    let md = render_report(&config.out_dir)?;
    let path = config.out_dir.join("report.md");
    std::fs::write(&path, &md).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("{md}");
    Ok(())
}

fn cmd_run_all(config: &RunConfig) -> Result<bool, Error> {
    let summary = run_all(config)?;
    for cell in &summary.cells {
        let status = if cell.error.is_some() {
            "FAILED"
        } else if cell.skipped.is_some() {
            "skipped"
        } else {
            "ok"
        };
        let detail = match (&cell.best, &cell.error, &cell.skipped) {
            (Some(best), _, _) => format!(
                "{} on {} (AUROC {:.3})",
                best.family.name(),
                best.variant.name(),
                best.metrics.auroc.map(|e| e.point).unwrap_or(f64::NAN)
            ),
            (_, Some(e), _) => e.clone(),
            (_, _, Some(s)) => s.clone(),
            _ => String::new(),
        };
        println!(
            "{:<16} {:<12} {:<8} {detail}",
            cell.surgery,
            cell.outcome.name(),
            status
        );
    }
    println!(
        "report bundle in {} (metrics.csv, variant_winners.csv, disruptions.json, manifest.json)",
        config.out_dir.display()
    );
    Ok(summary.any_failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Synth => cmd_synth(&config).map(|()| false),
        Command::Train => cmd_train(&config).map(|()| false),
        Command::Evaluate => cmd_evaluate(&config).map(|()| false),
        Command::Explain => cmd_explain(&config).map(|()| false),
        Command::Corr => cmd_corr(&config).map(|()| false),
        Command::Report => cmd_report(&config).map(|()| false),
        Command::RunAll => cmd_run_all(&config),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(Error::Config(msg)) | Err(Error::UnknownSurgery(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
