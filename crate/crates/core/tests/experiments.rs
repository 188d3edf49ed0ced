use aam_core::dataset::{filter_min_tests, stratified_split, SplitRatios, MIN_TESTS};
use aam_core::evaluation::{
    ablate_test_types, attention_timeline, export_attention, sweep_max_tests, FixedSetup, TOP_INSTANCES,
};
use aam_core::baselines::RfConfig;
use aam_core::pipeline::fit_model;
use aam_core::synth::generate_cohort;
use aam_core::{
    Aam, AamHyperparams, Cohort, Folds, Metric, ModelKind, Participant, SynthConfig, TestResult, TestType,
    TrainConfig, TrainingData,
};
use proptest::prelude::*;

fn folds(n: usize, seed: u64) -> Folds {
    let cohort = generate_cohort(&SynthConfig {
        n_participants: n,
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    stratified_split(&filter_min_tests(&cohort, MIN_TESTS), SplitRatios::default(), seed).unwrap()
}

fn setup() -> FixedSetup {
    FixedSetup {
        hyper: AamHyperparams {
            hidden_units: 16,
            layers: 1,
            dropout: 0.0,
            l2: 1e-5,
            use_demographics: false,
        },
        train: TrainConfig {
            max_epochs: 15,
            ..TrainConfig::new(16, 4)
        },
        forest: RfConfig {
            max_depth: 3,
            n_trees: 32,
            seed: 1,
        },
        n_boot: 100,
        seed: 3,
    }
}

fn without(c: &Cohort, t: TestType) -> Cohort {
    c.without_test_type(t)
}

#[test]
fn sweep_over_one_k_gives_one_row() {
    let f = folds(100, 1);
    let rows = sweep_max_tests(&f, &[ModelKind::Aam], &[25], &setup()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].model.as_str(), rows[0].k_max, rows[0].metric.as_str()), ("aam", 25, "aupr"));
    assert!(rows[0].ci_lo <= rows[0].ci_hi);
    assert!(sweep_max_tests(&f, &[], &[25], &setup()).is_err());
}

#[test]
fn mean_aggregation_rows_are_deterministic() {
    let f = folds(100, 2);
    let a = sweep_max_tests(&f, &[ModelKind::MeanAgg], &[25, 50], &setup()).unwrap();
    let b = sweep_max_tests(&f, &[ModelKind::MeanAgg], &[25, 50], &setup()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ablation_has_a_reference_and_nine_removals() {
    let mut f = folds(120, 3);
    // pinching never happens in this cohort, so removing it changes nothing
    for fold in [&mut f.train, &mut f.validation, &mut f.test] {
        *fold = without(fold, TestType::Pinching);
    }
    let report = ablate_test_types(&f, ModelKind::Aam, 60, &setup()).unwrap();
    assert_eq!(report.rows.len(), 10);
    assert!(report.rows[0].removed.is_none());
    let removed: Vec<&str> = report.rows[1..].iter().map(|r| r.removed.as_deref().unwrap()).collect();
    assert_eq!(removed, TestType::ALL.map(|t| t.as_str()));

    let reference = &report.rows[0];
    let pinching = report.rows.iter().find(|r| r.removed.as_deref() == Some("pinching")).unwrap();
    assert_eq!(pinching.f1, reference.f1);
    assert_eq!(pinching.f1_drop, 0.0);
    assert_eq!(reference.f1_drop, 0.0);
    let names: Vec<String> = report.table().iter().map(|r| r.model.clone()).collect();
    assert_eq!(names[0], "aam_all_tests");
    assert_eq!(names[9], "aam_without_drawing");
}

#[test]
fn exported_attention_sums_to_one_per_participant() {
    let f = folds(80, 4);
    let data = TrainingData::new(&f.train, &f.validation, 50).unwrap();
    let (ckpt, _) = fit_model(ModelKind::Aam, &data, 1, 5).unwrap();
    for p in f.test.iter() {
        let t = export_attention(&ckpt, p).unwrap();
        let total: f64 = t.entries.iter().map(|e| e.total_attention).sum();
        assert!((total - 1.0).abs() < 1e-9, "{}: {total}", p.id);
        assert_eq!(t.records_used, p.results.len().min(50));
        assert_eq!(t.entries.iter().filter(|e| e.top5).count(), t.entries.len().min(TOP_INSTANCES));
        assert!(t.entries.windows(2).all(|w| w[0].day <= w[1].day));
    }
    let (baseline, _) = fit_model(ModelKind::MeanAgg, &data, 1, 5).unwrap();
    assert!(export_attention(&baseline, f.test.iter().next().unwrap()).is_err());
}

fn participant(results: Vec<TestResult>) -> Participant {
    Participant {
        id: "P1".into(),
        age: 40,
        sex: 1,
        has_ms: true,
        results,
    }
}

fn record(metric: Metric, value: f64, timestamp: i64) -> TestResult {
    TestResult {
        test_type: metric.test_type(),
        metric,
        value,
        timestamp,
    }
}

fn model() -> (Aam, aam_core::Normalizer) {
    let f = folds(40, 9);
    let data = TrainingData::new(&f.train, &f.validation, 30).unwrap();
    (Aam::init(setup().hyper, 2).unwrap(), data.normalizer)
}

#[test]
fn a_single_test_gets_all_the_attention() {
    let (m, norm) = model();
    let p = participant(vec![record(Metric::MoodScore, 3.0, 1_600_000_000)]);
    let t = attention_timeline(&m, &norm, 250, 0.5, &p).unwrap();
    assert_eq!(t.entries.len(), 1);
    assert_eq!(t.entries[0].total_attention, 1.0);
    assert_eq!(t.entries[0].day, 0);
    assert!(t.entries[0].top5);
    assert!(attention_timeline(&m, &norm, 250, 0.5, &participant(vec![])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Records of one test instance share a timestamp; instances are grouped
    /// and their totals form a distribution.
    #[test]
    fn instance_totals_form_a_distribution(
        sessions in prop::collection::vec((0i64..400, prop::collection::vec(0usize..9, 1..4)), 1..12),
        k_max in 1usize..60,
    ) {
        let (m, norm) = model();
        let mut results = Vec::new();
        for (day, types) in &sessions {
            for (slot, &t) in types.iter().enumerate() {
                let ts = 1_600_000_000 + day * 86_400 + slot as i64 * 90;
                for metric in TestType::ALL[t].metrics() {
                    results.push(record(metric, 1.0, ts));
                }
            }
        }
        results.sort_by_key(|r| r.timestamp);
        let p = participant(results);
        let t = attention_timeline(&m, &norm, k_max, 0.5, &p).unwrap();
        let total: f64 = t.entries.iter().map(|e| e.total_attention).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(t.entries.iter().all(|e| e.total_attention > 0.0 && e.day >= 0));
        prop_assert_eq!(t.records_used, p.results.len().min(k_max));
        prop_assert_eq!(t.entries.iter().filter(|e| e.top5).count(), t.entries.len().min(TOP_INSTANCES));
        let min_top = t.entries.iter().filter(|e| e.top5).map(|e| e.total_attention).fold(f64::INFINITY, f64::min);
        prop_assert!(t.entries.iter().filter(|e| !e.top5).all(|e| e.total_attention <= min_top));
        prop_assert_eq!(t.predicted_positive, t.score >= 0.5);
    }
}
