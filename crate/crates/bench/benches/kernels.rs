use std::hint::black_box;

use aam_bench::{batch, scored_labels, sequence, sequences};
use aam_core::evaluation::{aupr, mww_exact, roc_auc};
use aam_core::{Aam, AamHyperparams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn hyper(n: usize, layers: usize) -> AamHyperparams {
    AamHyperparams {
        hidden_units: n,
        layers,
        dropout: 0.1,
        l2: 1e-5,
        use_demographics: true,
    }
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("aam_predict");
    for k in [25, 100, 250] {
        let model = Aam::init(hyper(64, 2), 1).unwrap();
        let fs = sequence(k, 2);
        let demo = Some(aam_core::Demographics::new(40, 1));
        group.bench_with_input(BenchmarkId::from_parameter(k), &fs, |b, fs| {
            b.iter(|| model.predict(black_box(fs), demo).unwrap())
        });
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("aam_loss_and_gradients");
    group.sample_size(20);
    for (n, layers) in [(16, 1), (64, 2), (128, 3)] {
        let model = Aam::init(hyper(n, layers), 3).unwrap();
        let seqs = sequences(32, 100, 4);
        let examples = batch(&seqs, true);
        group.bench_function(format!("N{n}_L{layers}_B32_k100"), |b| {
            b.iter(|| model.loss_and_gradients(black_box(&examples), Some(5)).unwrap())
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let (s, y) = scored_labels(10_000, 6);
    c.bench_function("roc_auc_10k", |b| b.iter(|| roc_auc(black_box(&s), &y).unwrap()));
    c.bench_function("aupr_10k", |b| b.iter(|| aupr(black_box(&s), &y).unwrap()));

    let a: Vec<f64> = s[..19].to_vec();
    let other: Vec<f64> = s[19..38].iter().map(|v| v + 0.2).collect();
    c.bench_function("mww_exact_19x19", |b| b.iter(|| mww_exact(black_box(&a), &other).unwrap()));
}

criterion_group!(benches, forward, backward, metrics);
criterion_main!(benches);
