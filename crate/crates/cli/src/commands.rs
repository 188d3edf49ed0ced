use std::fs;
use std::path::Path;
use std::time::Instant;

use aam_core::dataset::{filter_min_tests, parse_cohort, stratified_split, write_cohort, SplitRatios, MIN_TESTS};
use aam_core::evaluation::{
    ablate_test_types, evaluate_scores, export_attention, line_chart_svg, roc_curve, sweep_max_tests, write_roc_csv,
    write_table, AblationReport, AttentionTimeline, TableRow, DEFAULT_RESAMPLES,
};
use aam_core::pipeline::fit_model;
use aam_core::seed::{self, Stream};
use aam_core::synth::generate_cohort;
use aam_core::training::{labels, prepare, write_history};
use aam_core::{Checkpoint, Cohort, Folds, MetricsReport, SynthConfig, TrainingData};

use crate::experiment::ExperimentConfig;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{AblateArgs, AttentionArgs, CliError, EvaluateArgs, FoldChoice, GenerateArgs, SweepArgs, TrainArgs};

pub struct GenerateOutput {
    pub cohort: Cohort,
    pub manifest: RunManifest,
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub manifest: RunManifest,
}

pub struct EvaluateOutput {
    pub report: MetricsReport,
    pub manifest: RunManifest,
}

pub struct SweepOutput {
    pub rows: Vec<TableRow>,
    pub manifest: RunManifest,
}

pub struct AblateOutput {
    pub report: AblationReport,
    pub manifest: RunManifest,
}

pub struct AttentionOutput {
    pub timeline: AttentionTimeline,
    pub manifest: RunManifest,
}

fn read_input(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {what} `{}`: {e}", path.display())))
}

fn load_cohort(path: &Path, manifest: &mut RunManifest) -> Result<Cohort, CliError> {
    let bytes = read_input(path, "data file")?;
    manifest.input(path, &bytes);
    parse_cohort(&bytes[..]).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path, manifest: &mut RunManifest) -> Result<Checkpoint, CliError> {
    let bytes = read_input(path, "checkpoint")?;
    manifest.input(path, &bytes);
    Checkpoint::from_bytes(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_experiment(path: Option<&Path>, manifest: &mut RunManifest) -> Result<ExperimentConfig, CliError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let bytes = read_input(path, "config")?;
    manifest.input(path, &bytes);
    let text = String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{}: not UTF-8", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Minimum-test filter followed by the seeded stratified split.
fn split(cohort: &Cohort, seed: u64) -> Result<Folds, CliError> {
    let kept = filter_min_tests(cohort, MIN_TESTS);
    log::info!("{} of {} participants have at least {MIN_TESTS} tests", kept.len(), cohort.len());
    Ok(stratified_split(&kept, SplitRatios::default(), seed)?)
}

fn record_fit_folds(manifest: &mut RunManifest, folds: &Folds) {
    manifest.fold("train", folds.train.len(), "fit");
    manifest.fold("validation", folds.validation.len(), "model selection and threshold");
}

fn write_artifact(out: &Path, name: &str, bytes: &[u8], manifest: &mut RunManifest) -> Result<(), CliError> {
    fs::write(out.join(name), bytes)?;
    manifest.artifact(name);
    Ok(())
}

fn create_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::usage(format!("cannot create output directory `{}`: {e}", out.display())))
}

fn finish(mut manifest: RunManifest, out: &Path, start: Instant) -> Result<RunManifest, CliError> {
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<GenerateOutput, CliError> {
    let start = Instant::now();
    let mut inputs = Vec::new();
    let mut cfg = match &args.config {
        Some(path) => {
            let bytes = read_input(path, "config")?;
            inputs.push((path, bytes.clone()));
            let text =
                String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{}: not UTF-8", path.display())))?;
            SynthConfig::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let config_text = cfg.to_text();
    let mut manifest = RunManifest::new("generate", cfg.seed, &config_text);
    for (path, bytes) in inputs {
        manifest.input(path, &bytes);
    }
    create_out(&args.out)?;

    let cohort = generate_cohort(&cfg)?;
    let mut csv = Vec::new();
    write_cohort(&cohort, &mut csv)?;
    write_artifact(&args.out, "cohort.csv", &csv, &mut manifest)?;
    write_artifact(&args.out, "synth_config.txt", config_text.as_bytes(), &mut manifest)?;
    log::info!("generated {} participants", cohort.len());
    let manifest = finish(manifest, &args.out, start)?;
    Ok(GenerateOutput { cohort, manifest })
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutput, CliError> {
    let start = Instant::now();
    if args.budget == 0 {
        return Err(CliError::usage("--budget must be at least 1"));
    }
    if args.k_max == 0 {
        return Err(CliError::usage("--k-max must be at least 1"));
    }
    let config_text = format!("model = {}\nbudget = {}\nk_max = {}\n", args.model, args.budget, args.k_max);
    let mut manifest = RunManifest::new("train", args.seed, &config_text);
    manifest.k_max = Some(args.k_max);
    let cohort = load_cohort(&args.data, &mut manifest)?;
    create_out(&args.out)?;

    let folds = split(&cohort, args.seed)?;
    record_fit_folds(&mut manifest, &folds);
    let data = TrainingData::new(&folds.train, &folds.validation, args.k_max)?;
    let (checkpoint, fit_log) = fit_model(args.model, &data, args.budget, args.seed)?;

    write_artifact(&args.out, "model.ckpt", &checkpoint.to_bytes(), &mut manifest)?;
    let mut history = Vec::new();
    write_history(&fit_log.history, &mut history)?;
    write_artifact(&args.out, "history.jsonl", &history, &mut manifest)?;
    let mut trials = Vec::new();
    for t in &fit_log.trials {
        serde_json::to_writer(&mut trials, t)?;
        trials.push(b'\n');
    }
    write_artifact(&args.out, "trials.jsonl", &trials, &mut manifest)?;
    log::info!("{} trained, threshold {:.4}", args.model, checkpoint.threshold);
    let manifest = finish(manifest, &args.out, start)?;
    Ok(TrainOutput { checkpoint, manifest })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluateOutput, CliError> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("evaluate", 0, "");
    let checkpoint = load_checkpoint(&args.checkpoint, &mut manifest)?;
    let config_text = format!("fold = {:?}\nresamples = {DEFAULT_RESAMPLES}\n", args.fold);
    manifest.k_max = Some(checkpoint.k_max);
    manifest.seed = checkpoint.seed;
    manifest.set_config(&config_text);
    let cohort = load_cohort(&args.data, &mut manifest)?;
    create_out(&args.out)?;

    let (fold_name, fold) = match args.fold {
        FoldChoice::Test => ("test", split(&cohort, checkpoint.seed)?.test),
        FoldChoice::All => ("all", filter_min_tests(&cohort, MIN_TESTS)),
    };
    manifest.fold(fold_name, fold.len(), "evaluation");
    let seen = fold
        .iter()
        .filter(|p| checkpoint.train_ids.contains(&p.id) || checkpoint.validation_ids.contains(&p.id))
        .count();

    let prepared = prepare(&fold, &checkpoint.normalizer, checkpoint.k_max)?;
    let scores = checkpoint.model.score_all(&prepared)?;
    let y = labels(&prepared);
    let mut evaluation = evaluate_scores(
        checkpoint.kind.as_str(),
        &scores,
        &y,
        checkpoint.threshold,
        DEFAULT_RESAMPLES,
        seed::derive(checkpoint.seed, Stream::Bootstrap, 0),
    )?;
    if seen > 0 {
        let warning = format!("{seen} of {} evaluated participants were used for training or validation", fold.len());
        log::warn!("{warning}");
        evaluation.report.warnings.push(warning.clone());
        manifest.warnings.push(warning);
    }
    let report = evaluation.report;

    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    write_artifact(&args.out, "metrics.json", &json, &mut manifest)?;
    let mut roc = Vec::new();
    write_roc_csv(&roc_curve(&scores, &y)?, &mut roc)?;
    write_artifact(&args.out, "roc.csv", &roc, &mut manifest)?;
    let manifest = finish(manifest, &args.out, start)?;
    Ok(EvaluateOutput { report, manifest })
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutput, CliError> {
    let start = Instant::now();
    if args.model.is_empty() || args.k_list.is_empty() {
        return Err(CliError::usage("sweep needs at least one model and one k"));
    }
    if args.k_list.contains(&0) {
        return Err(CliError::usage("--k-list values must be at least 1"));
    }
    let mut manifest = RunManifest::new("sweep", args.seed, "");
    let exp = load_experiment(args.config.as_deref(), &mut manifest)?;
    let models: Vec<&str> = args.model.iter().map(|m| m.as_str()).collect();
    let ks: Vec<String> = args.k_list.iter().map(|k| k.to_string()).collect();
    let config_text = format!("{}models = {}\nk_list = {}\n", exp.to_text(), models.join(","), ks.join(","));
    manifest.set_config(&config_text);
    let cohort = load_cohort(&args.data, &mut manifest)?;
    create_out(&args.out)?;

    let folds = split(&cohort, args.seed)?;
    record_fit_folds(&mut manifest, &folds);
    manifest.fold("test", folds.test.len(), "evaluation");
    let rows = sweep_max_tests(&folds, &args.model, &args.k_list, &exp.setup(args.seed))?;

    let mut csv = Vec::new();
    write_table(&rows, &mut csv)?;
    write_artifact(&args.out, "sweep.csv", &csv, &mut manifest)?;
    let series: Vec<(String, Vec<(f64, f64)>)> = args
        .model
        .iter()
        .map(|m| {
            let points = rows
                .iter()
                .filter(|r| r.model == m.as_str())
                .map(|r| (r.k_max as f64, r.point))
                .collect();
            (m.to_string(), points)
        })
        .collect();
    let svg = line_chart_svg("AUPR by maximum number of tests", "maximum tests", "AUPR", &series)?;
    write_artifact(&args.out, "sweep.svg", svg.as_bytes(), &mut manifest)?;
    let manifest = finish(manifest, &args.out, start)?;
    Ok(SweepOutput { rows, manifest })
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblateOutput, CliError> {
    let start = Instant::now();
    if args.k_max == 0 {
        return Err(CliError::usage("--k-max must be at least 1"));
    }
    let mut manifest = RunManifest::new("ablate", args.seed, "");
    let exp = load_experiment(args.config.as_deref(), &mut manifest)?;
    let config_text = format!("{}model = {}\nk_max = {}\n", exp.to_text(), args.model, args.k_max);
    manifest.k_max = Some(args.k_max);
    manifest.set_config(&config_text);
    let cohort = load_cohort(&args.data, &mut manifest)?;
    create_out(&args.out)?;

    let folds = split(&cohort, args.seed)?;
    record_fit_folds(&mut manifest, &folds);
    manifest.fold("test", folds.test.len(), "evaluation");
    let report = ablate_test_types(&folds, args.model, args.k_max, &exp.setup(args.seed))?;
    for row in &report.rows {
        if row.emptied > 0 {
            manifest.warnings.push(format!(
                "{}: {} participants left without tests, scored 0.5",
                row.model_name(args.model),
                row.emptied
            ));
        }
    }

    let mut csv = Vec::new();
    write_table(&report.table(), &mut csv)?;
    write_artifact(&args.out, "ablation.csv", &csv, &mut manifest)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    write_artifact(&args.out, "ablation.json", &json, &mut manifest)?;
    let manifest = finish(manifest, &args.out, start)?;
    Ok(AblateOutput { report, manifest })
}

pub fn cmd_attention(args: &AttentionArgs) -> Result<AttentionOutput, CliError> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("attention", 0, "");
    let checkpoint = load_checkpoint(&args.checkpoint, &mut manifest)?;
    let config_text = format!("participant = {}\n", args.participant);
    manifest.k_max = Some(checkpoint.k_max);
    manifest.seed = checkpoint.seed;
    manifest.set_config(&config_text);
    let cohort = load_cohort(&args.data, &mut manifest)?;
    let participant = cohort
        .get(&args.participant)
        .ok_or_else(|| CliError::usage(format!("unknown participant `{}`", args.participant)))?;
    if !matches!(checkpoint.model, aam_core::FittedModel::Aam(_)) {
        return Err(CliError::usage(format!(
            "attention export needs an attention model checkpoint, got `{}`",
            checkpoint.kind
        )));
    }
    create_out(&args.out)?;

    let timeline = export_attention(&checkpoint, participant)?;
    manifest.fold("participant", 1, "attention export");
    let mut lines = Vec::new();
    timeline.write_jsonl(&mut lines)?;
    write_artifact(&args.out, "attention.jsonl", &lines, &mut manifest)?;
    let mut summary = serde_json::to_vec_pretty(&timeline.summary())?;
    summary.push(b'\n');
    write_artifact(&args.out, "attention_summary.json", &summary, &mut manifest)?;
    let manifest = finish(manifest, &args.out, start)?;
    Ok(AttentionOutput { timeline, manifest })
}
