use aam_core::evaluation::{aupr, bootstrap_distribution, evaluate_scores, mww_exact, mww_normal, mww_test, roc_auc};
use aam_core::seed;
use proptest::prelude::*;
use rand::Rng;

fn pairwise_auc(s: &[f64], y: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (si, yi) in s.iter().zip(y) {
        for (sj, yj) in s.iter().zip(y) {
            if *yi && !*yj {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn threshold_ap(s: &[f64], y: &[bool]) -> f64 {
    let pos = y.iter().filter(|v| **v).count() as f64;
    let mut cuts = s.to_vec();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut ap = 0.0;
    let mut last = 0.0;
    for t in cuts {
        let called: Vec<bool> = s.iter().zip(y).filter(|(v, _)| **v >= t).map(|(_, l)| *l).collect();
        let tp = called.iter().filter(|l| **l).count() as f64;
        ap += (tp / pos - last) * tp / called.len() as f64;
        last = tp / pos;
    }
    ap
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=50, any::<bool>()).prop_flat_map(|(n, ties)| {
        let score = if ties {
            (0u8..5).prop_map(|v| v as f64 / 4.0).boxed()
        } else {
            (0.0f64..1.0).boxed()
        };
        (
            prop::collection::vec(score, n),
            prop::collection::vec(any::<bool>(), n - 2).prop_map(|mut y| {
                y.push(true);
                y.push(false);
                y
            }),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auc_and_aupr_match_enumeration((s, y) in scored_labels()) {
        prop_assert!((roc_auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs() <= 1e-12);
        prop_assert!((aupr(&s, &y).unwrap() - threshold_ap(&s, &y)).abs() <= 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps((s, y) in scored_labels()) {
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp()).collect();
        prop_assert!((roc_auc(&s, &y).unwrap() - roc_auc(&mapped, &y).unwrap()).abs() <= 1e-12);
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((roc_auc(&s, &y).unwrap() + roc_auc(&flipped, &y).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_rank_sum_matches_enumeration(
        a in prop::collection::vec(0u8..6, 1..=7),
        b in prop::collection::vec(0u8..6, 1..=7),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let p = mww_exact(&a, &b).unwrap();
        prop_assert!((p - enumerated_p(&a, &b)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - mww_exact(&b, &a).unwrap()).abs() <= 1e-12);
    }
}

fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let rank = |v: f64| {
        let below = pooled.iter().filter(|w| **w < v).count() as f64;
        let tied = pooled.iter().filter(|w| **w == v).count() as f64;
        below + (tied + 1.0) / 2.0
    };
    let ranks: Vec<f64> = pooled.iter().map(|v| rank(*v)).collect();
    let mean = a.len() as f64 * (n as f64 + 1.0) / 2.0;
    let obs = (ranks[..a.len()].iter().sum::<f64>() - mean).abs();
    let (mut hit, mut all) = (0.0, 0.0);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == a.len() {
            all += 1.0;
            let r: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if (r - mean).abs() >= obs - 1e-9 {
                hit += 1.0;
            }
        }
    }
    hit / all
}

#[test]
fn exact_and_normal_agree_at_moderate_sizes() {
    let mut rng = seed::rng(12);
    for shift in [0.0, 0.3, 0.6, 1.0] {
        let a: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..25).map(|_| rng.random::<f64>() + shift).collect();
        let exact = mww_exact(&a, &b).unwrap();
        let normal = mww_normal(&a, &b).unwrap();
        assert!((exact - normal).abs() < 0.02, "shift {shift}: {exact} vs {normal}");
        assert_eq!(mww_test(&a, &b).unwrap(), normal);
    }
    let small = [1.0, 2.0, 3.0];
    assert_eq!(mww_test(&small, &[4.0, 5.0]).unwrap(), mww_exact(&small, &[4.0, 5.0]).unwrap());
}

/// The percentile interval holds the full-sample estimate in nearly every
/// replication.
#[test]
fn bootstrap_intervals_contain_the_point_estimate() {
    let mut contained = 0;
    for rep in 0..100u64 {
        let mut rng = seed::rng(500 + rep);
        let s: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let y: Vec<bool> = s.iter().map(|v| rng.random_bool(0.2 + 0.6 * v)).collect();
        let ev = evaluate_scores("m", &s, &y, 0.5, 200, rep).unwrap();
        let auc = ev.report.auc;
        assert!(auc.ci_lo <= auc.ci_hi);
        if auc.contains_point() {
            contained += 1;
        }
    }
    assert!(contained >= 95, "{contained} of 100");
}

#[test]
fn bootstrap_resamples_depend_only_on_seed_and_index() {
    let mut rng = seed::rng(3);
    let s: Vec<f64> = (0..80).map(|_| rng.random::<f64>()).collect();
    let y: Vec<bool> = (0..80).map(|i| i % 3 == 0).collect();
    let a = bootstrap_distribution(roc_auc, &s, &y, 50, 9).unwrap();
    let b = bootstrap_distribution(roc_auc, &s, &y, 120, 9).unwrap();
    assert_eq!(a.values[..], b.values[..50]);
    let c = bootstrap_distribution(roc_auc, &s, &y, 50, 10).unwrap();
    assert_ne!(a.values, c.values);
}
