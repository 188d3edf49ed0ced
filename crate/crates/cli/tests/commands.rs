use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use aam_cli::{
    cmd_ablate, cmd_attention, cmd_evaluate, cmd_generate, cmd_sweep, cmd_train, AblateArgs, AttentionArgs,
    EvaluateArgs, FoldChoice, GenerateArgs, RunManifest, SweepArgs, TrainArgs, MANIFEST_FILE,
};
use aam_core::evaluation::SWEEP_K;
use aam_core::ModelKind;
use tempfile::TempDir;

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_aam"))
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

/// A small cohort written to `<tmp>/gen/cohort.csv`.
fn small_cohort(tmp: &TempDir, n: usize) -> PathBuf {
    let config = tmp.path().join("synth.txt");
    fs::write(&config, format!("n_participants = {n}\n")).unwrap();
    let out = tmp.path().join("gen");
    cmd_generate(&GenerateArgs {
        config: Some(config),
        seed: Some(3),
        out: out.clone(),
    })
    .unwrap();
    out.join("cohort.csv")
}

fn train_args(data: &Path, model: ModelKind, out: PathBuf) -> TrainArgs {
    TrainArgs {
        data: data.to_path_buf(),
        model,
        budget: 1,
        k_max: 250,
        seed: 5,
        out,
    }
}

#[test]
fn generate_twice_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let done = cmd_generate(&GenerateArgs {
            config: None,
            seed: Some(7),
            out: out.clone(),
        })
        .unwrap();
        assert_eq!(done.cohort.len(), 774);
        fs::read(out.join("cohort.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m.command, "generate");
    assert_eq!(m.seed, 7);
    assert!(m.artifacts.contains(&"cohort.csv".to_string()));
}

#[test]
fn missing_config_exits_with_2() {
    let tmp = TempDir::new().unwrap();
    let status = bin()
        .args(["generate", "--config", "/definitely/not/here.txt", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("here.txt"));
}

#[test]
fn bad_flags_exit_with_2() {
    let out = bin().args(["train", "x.csv", "--model", "lstm", "--out", "o"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["train", "x.csv", "--model", "aam", "--out", "o"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing data file is a usage error");
}

#[test]
fn zero_budget_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 40);
    let mut args = train_args(&data, ModelKind::Aam, tmp.path().join("t"));
    args.budget = 0;
    assert_eq!(cmd_train(&args).err().unwrap().exit_code(), 2);
}

#[test]
fn train_smoke_then_evaluate_and_attention() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 60);
    let out = tmp.path().join("train");
    let start = Instant::now();
    let trained = cmd_train(&train_args(&data, ModelKind::AamDemo, out.clone())).unwrap();
    assert!(start.elapsed().as_secs() < 60, "budget-1 training took {:?}", start.elapsed());

    let m = manifest(&out);
    assert_eq!(m.k_max, Some(250));
    assert!(!m.test_fold_leaked());
    assert!(m.fold_access.iter().all(|a| a.fold != "test"));
    for name in ["model.ckpt", "history.jsonl", "trials.jsonl"] {
        assert!(out.join(name).exists(), "{name}");
        assert!(m.artifacts.contains(&name.to_string()));
    }
    assert_eq!(fs::read_to_string(out.join("trials.jsonl")).unwrap().lines().count(), 1);
    assert_eq!(trained.checkpoint.k_max, 250);

    let ckpt = out.join("model.ckpt");
    let eval = cmd_evaluate(&EvaluateArgs {
        checkpoint: ckpt.clone(),
        data: data.clone(),
        fold: FoldChoice::Test,
        out: tmp.path().join("eval"),
    })
    .unwrap();
    assert!(eval.report.warnings.is_empty());
    for (name, e) in eval.report.estimates() {
        assert!(e.ci_lo <= e.ci_hi, "{name}: {e:?}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("eval/metrics.json")).unwrap()).unwrap();
    for key in ["auc", "aupr", "f1", "sensitivity", "specificity"] {
        assert!(metrics[key]["ci_lo"].is_number() && metrics[key]["ci_hi"].is_number(), "{key}");
    }
    let roc = fs::read_to_string(tmp.path().join("eval/roc.csv")).unwrap();
    assert!(roc.lines().count() >= 2);

    let all = cmd_evaluate(&EvaluateArgs {
        checkpoint: ckpt.clone(),
        data: data.clone(),
        fold: FoldChoice::All,
        out: tmp.path().join("eval_all"),
    })
    .unwrap();
    assert_eq!(all.report.warnings.len(), 1, "scoring training data must be flagged");
    assert_eq!(manifest(&tmp.path().join("eval_all")).warnings.len(), 1);

    let id = trained.checkpoint.train_ids[0].clone();
    let att = cmd_attention(&AttentionArgs {
        checkpoint: ckpt.clone(),
        data: data.clone(),
        participant: id.clone(),
        out: tmp.path().join("att"),
    })
    .unwrap();
    assert_eq!(att.timeline.participant, id);
    let total: f64 = att.timeline.entries.iter().map(|e| e.total_attention).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let lines = fs::read_to_string(tmp.path().join("att/attention.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), att.timeline.entries.len());

    let unknown = cmd_attention(&AttentionArgs {
        checkpoint: ckpt,
        data,
        participant: "P99999".into(),
        out: tmp.path().join("att2"),
    });
    assert_eq!(unknown.err().unwrap().exit_code(), 2);
}

#[test]
fn attention_on_a_baseline_checkpoint_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 40);
    let out = tmp.path().join("t");
    let trained = cmd_train(&train_args(&data, ModelKind::MeanAggDemo, out.clone())).unwrap();
    let err = cmd_attention(&AttentionArgs {
        checkpoint: out.join("model.ckpt"),
        data,
        participant: trained.checkpoint.train_ids[0].clone(),
        out: tmp.path().join("a"),
    })
    .err()
    .unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn corrupt_checkpoint_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 40);
    let ckpt = tmp.path().join("bad.ckpt");
    fs::write(&ckpt, b"not a checkpoint").unwrap();
    let err = cmd_evaluate(&EvaluateArgs {
        checkpoint: ckpt,
        data,
        fold: FoldChoice::Test,
        out: tmp.path().join("e"),
    })
    .err()
    .unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sweep_emits_one_row_per_k_and_model() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 120);
    let out = tmp.path().join("sweep");
    let done = cmd_sweep(&SweepArgs {
        data,
        config: None,
        seed: 2,
        model: vec![ModelKind::MeanAgg, ModelKind::MeanAggDemo],
        k_list: SWEEP_K.to_vec(),
        out: out.clone(),
    })
    .unwrap();
    assert_eq!(done.rows.len(), SWEEP_K.len() * 2);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + SWEEP_K.len() * 2);
    assert!(fs::read_to_string(out.join("sweep.svg")).unwrap().starts_with("<svg"));
    let m = manifest(&out);
    assert!(!m.test_fold_leaked());
}

#[test]
fn ablate_emits_nine_removals_and_a_reference() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 120);
    let out = tmp.path().join("ablate");
    let done = cmd_ablate(&AblateArgs {
        data,
        config: None,
        seed: 2,
        model: ModelKind::MeanAgg,
        k_max: 250,
        out: out.clone(),
    })
    .unwrap();
    assert_eq!(done.report.rows.len(), 10);
    assert_eq!(done.report.rows.iter().filter(|r| r.removed.is_none()).count(), 1);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.contains("mean_agg_all_tests"));
    assert!(csv.contains("mean_agg_without_drawing"));
}

#[test]
fn experiment_config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 40);
    let config = tmp.path().join("exp.txt");
    fs::write(&config, "hidden_units = 33\n").unwrap();
    let err = cmd_sweep(&SweepArgs {
        data,
        config: Some(config),
        seed: 1,
        model: vec![ModelKind::MeanAgg],
        k_list: vec![25],
        out: tmp.path().join("s"),
    })
    .err()
    .unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn manifests_differ_only_in_wall_clock() {
    let tmp = TempDir::new().unwrap();
    let data = small_cohort(&tmp, 60);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        cmd_train(&train_args(&data, ModelKind::RfDemo, out.clone())).unwrap();
        let mut m = manifest(&out);
        m.wall_clock_seconds = 0.0;
        (m, fs::read(out.join("model.ckpt")).unwrap())
    };
    let (a, ca) = run("a");
    let (b, cb) = run("b");
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}
