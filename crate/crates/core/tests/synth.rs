use std::collections::HashSet;

use aam_core::dataset::{filter_min_tests, MIN_TESTS};
use aam_core::evaluation::roc_auc;
use aam_core::synth::{describe_cohort, generate_cohort, QuantileSummary};
use aam_core::{Cohort, Metric, SynthConfig};
use statrs::function::erf::erfc;

fn cohort(cfg: SynthConfig) -> Cohort {
    generate_cohort(&cfg).unwrap()
}

fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Each participant's first recorded value of `metric`, with labels.
fn first_values(c: &Cohort, metric: Metric) -> (Vec<f64>, Vec<bool>) {
    c.iter()
        .filter_map(|p| p.results.iter().find(|r| r.metric == metric).map(|r| (r.value, p.has_ms)))
        .unzip()
}

#[test]
fn null_cohort_carries_no_signal() {
    let c = cohort(SynthConfig {
        n_participants: 2000,
        seed: 31,
        ..SynthConfig::default()
    }
    .null());
    for metric in [Metric::DrawingHausdorffSquare, Metric::SymbolResponseTime, Metric::BalanceSway] {
        let (s, y) = first_values(&c, metric);
        let auc = roc_auc(&s, &y).unwrap();
        assert!((auc - 0.5).abs() < 0.03, "{metric}: AUC {auc}");
    }
}

#[test]
fn single_metric_auc_matches_the_planted_effect() {
    let cfg = SynthConfig {
        n_participants: 2000,
        seed: 32,
        ..SynthConfig::default()
    };
    let c = cohort(cfg.clone());
    for metric in [Metric::DrawingHausdorffSpiral, Metric::SymbolResponseTime, Metric::WalkingSteps, Metric::UturnTurnSpeed] {
        let d = cfg.metrics[metric.index()].effect;
        let (s, y) = first_values(&c, metric);
        assert_eq!(s.len(), 2000, "day 0 is a full suite");
        let auc = roc_auc(&s, &y).unwrap();
        let expected = phi(d / std::f64::consts::SQRT_2);
        assert!((auc - expected).abs() < 0.03, "{metric}: AUC {auc} vs {expected}");
    }
}

#[test]
fn marginals_at_the_default_size() {
    let c = cohort(SynthConfig::default());
    assert_eq!(c.len(), 774);
    let n = c.len() as f64;
    assert!((c.prevalence() - 0.52).abs() <= 0.02);
    let female = c.iter().filter(|p| p.sex == 1).count() as f64 / n;
    assert!((female - 0.60).abs() <= 0.02);
    let ages: Vec<f64> = c.iter().map(|p| p.age as f64).collect();
    let q = QuantileSummary::of(&ages).unwrap();
    assert!((q.median - 41.0).abs() <= 2.0, "{q:?}");
    let female_ms = c.iter().filter(|p| p.has_ms && p.sex == 1).count() as f64
        / c.iter().filter(|p| p.has_ms).count() as f64;
    assert!(female_ms > female, "MS group is enriched for women");
}

#[test]
fn values_stay_in_their_domains_and_records_are_well_formed() {
    let c = cohort(SynthConfig {
        n_participants: 300,
        seed: 5,
        ..SynthConfig::default()
    });
    let mut ids = HashSet::new();
    for p in &c {
        assert!(ids.insert(p.id.clone()), "duplicate id {}", p.id);
        assert!((18..=90).contains(&p.age));
        assert!(p.sex <= 1);
        assert!(p.results.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        for r in &p.results {
            assert_eq!(r.metric.test_type(), r.test_type);
            let v = r.value;
            assert!(v.is_finite() && v >= 0.0, "{r:?}");
            match r.metric {
                Metric::MoodScore => assert!(v.fract() == 0.0 && (1.0..=5.0).contains(&v)),
                Metric::PinchingHand => assert!(v == 0.0 || v == 1.0),
                Metric::SymbolCorrect
                | Metric::SymbolBaselineCorrect
                | Metric::WalkingSteps
                | Metric::UturnTurns
                | Metric::PinchingCount => assert_eq!(v.fract(), 0.0),
                _ => assert_eq!((v * 1e4).round() / 1e4, v),
            }
        }
        let first = &p.results[0];
        let day0: HashSet<Metric> = p
            .results
            .iter()
            .filter(|r| r.timestamp - first.timestamp < 86_400)
            .map(|r| r.metric)
            .collect();
        assert_eq!(day0.len(), Metric::ALL.len(), "{}: day 0 is a full suite", p.id);
    }
}

#[test]
fn nearly_everyone_passes_the_minimum_test_filter() {
    let c = cohort(SynthConfig::default());
    let kept = filter_min_tests(&c, MIN_TESTS).len();
    assert!(kept as f64 >= 0.95 * c.len() as f64, "{kept} of {}", c.len());
}

#[test]
fn describe_matches_a_sorting_oracle() {
    let c = cohort(SynthConfig {
        n_participants: 101,
        seed: 8,
        ..SynthConfig::default()
    });
    let rows = describe_cohort(&[("all", &c)]).unwrap();
    let mut ages: Vec<u32> = c.iter().map(|p| p.age).collect();
    ages.sort_unstable();
    // nearest rank: ceil(q · n), 1-based
    let at = |q: f64| ages[((q * ages.len() as f64).ceil() as usize).max(1) - 1] as f64;
    assert_eq!(rows[0].age.median, at(0.5));
    assert_eq!(rows[0].age.q10, at(0.1));
    assert_eq!(rows[0].age.q90, at(0.9));
    assert_eq!(rows[0].subjects, 101);
    assert_eq!(rows[0].subjects_pct, 100.0);
    assert!(describe_cohort(&[("all", &c), ("none", &Cohort::default())]).is_err());
}

#[test]
fn generation_is_deterministic_per_seed() {
    let cfg = SynthConfig {
        n_participants: 50,
        ..SynthConfig::default()
    };
    assert_eq!(cohort(cfg.clone()), cohort(cfg.clone()));
    assert_ne!(cohort(cfg.clone()), cohort(SynthConfig { seed: 8, ..cfg }));
}
