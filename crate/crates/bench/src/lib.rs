//! Seeded inputs shared by the benchmarks.

use aam_core::aam::Example;
use aam_core::dataset::FEATURE_DIM;
use aam_core::seed;
use aam_core::{Demographics, FeatureSequence};
use rand::Rng;

/// `k` feature rows with one metric indicator each.
pub fn sequence(k: usize, seed_value: u64) -> FeatureSequence {
    let mut rng = seed::rng(seed_value);
    let rows: Vec<[f64; FEATURE_DIM]> = (0..k)
        .map(|i| {
            let mut row = [0.0; FEATURE_DIM];
            row[0] = if i == 0 { 0.0 } else { rng.random() };
            row[1 + rng.random_range(0..16)] = 1.0;
            row[FEATURE_DIM - 1] = rng.random();
            row
        })
        .collect();
    FeatureSequence::from_rows(&rows)
}

pub fn sequences(n: usize, k: usize, seed_value: u64) -> Vec<FeatureSequence> {
    (0..n).map(|i| sequence(k, seed_value.wrapping_add(i as u64))).collect()
}

pub fn batch(seqs: &[FeatureSequence], demographics: bool) -> Vec<Example<'_>> {
    seqs.iter()
        .enumerate()
        .map(|(i, fs)| Example {
            features: fs,
            demographics: demographics.then(|| Demographics::new(30 + (i % 40) as u32, (i % 2) as u8)),
            label: (i % 2) as f64,
        })
        .collect()
}

/// Scores with a mild dependence on the labels.
pub fn scored_labels(n: usize, seed_value: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|_| {
            let s: f64 = rng.random();
            (s, rng.random_bool(0.3 + 0.4 * s))
        })
        .unzip()
}
