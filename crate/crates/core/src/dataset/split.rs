use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Cohort, Participant};
use crate::error::{Error, Result};
use crate::numeric::nearest_rank_quantile;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid(format!("split ratios out of range: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// Integer fold sizes for `n` participants. Train and validation are
    /// rounded; test takes the remainder.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let train = (self.train * n as f64).round() as usize;
        let validation = ((self.validation * n as f64).round() as usize).min(n - train.min(n));
        [train.min(n), validation, n - train.min(n) - validation]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Folds {
    pub train: Cohort,
    pub validation: Cohort,
    pub test: Cohort,
}

impl Folds {
    pub fn all(&self) -> impl Iterator<Item = &Participant> {
        self.train
            .iter()
            .chain(self.validation.iter())
            .chain(self.test.iter())
    }
}

/// Stratum key: diagnosis × sex × age quartile × test-count median split.
fn strata(cohort: &Cohort) -> Vec<(u8, u8, u8, u8)> {
    let mut ages: Vec<f64> = cohort.iter().map(|p| p.age as f64).collect();
    ages.sort_by(f64::total_cmp);
    let cuts = [0.25, 0.5, 0.75].map(|q| nearest_rank_quantile(&ages, q));
    let mut counts: Vec<f64> = cohort.iter().map(|p| p.results.len() as f64).collect();
    counts.sort_by(f64::total_cmp);
    let median_count = nearest_rank_quantile(&counts, 0.5);

    cohort
        .iter()
        .map(|p| {
            let quartile = cuts.iter().filter(|&&c| p.age as f64 > c).count() as u8;
            let heavy_user = (p.results.len() as f64 > median_count) as u8;
            (p.has_ms as u8, p.sex, quartile, heavy_user)
        })
        .collect()
}

/// Assigns participants to train/validation/test folds within strata.
///
/// Participants are grouped by stratum and shuffled inside each stratum.
/// The concatenated strata are then dealt out by largest remaining quota,
/// which keeps every stratum within rounding of the target ratios while
/// hitting the global fold sizes exactly.
pub fn stratified_split(cohort: &Cohort, ratios: SplitRatios, seed: u64) -> Result<Folds> {
    ratios.validate()?;
    let n = cohort.len();
    if n < 10 {
        return Err(Error::invalid(format!(
            "stratified split needs at least 10 participants, got {n}"
        )));
    }

    let keys = strata(cohort);
    let mut groups: BTreeMap<(u8, u8, u8, u8), Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.into_iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    let mut rng = seed::derived_rng(seed, seed::Stream::Split, 0);
    let mut ordered = Vec::with_capacity(n);
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        ordered.extend_from_slice(members);
    }

    let targets = ratios.sizes(n);
    let mut assigned = [0usize; 3];
    let mut fold_of = vec![0usize; n];
    for (j, &participant) in ordered.iter().enumerate() {
        let progress = (j + 1) as f64 / n as f64;
        let fold = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] as f64 * progress - assigned[a] as f64;
                let db = targets[b] as f64 * progress - assigned[b] as f64;
                // earlier fold wins ties
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("three folds");
        assigned[fold] += 1;
        fold_of[participant] = fold;
    }
    debug_assert_eq!(assigned, targets);

    let mut parts: [Vec<Participant>; 3] = Default::default();
    for (i, p) in cohort.iter().enumerate() {
        parts[fold_of[i]].push(p.clone());
    }
    let [train, validation, test] = parts;
    Ok(Folds {
        train: Cohort::new(train),
        validation: Cohort::new(validation),
        test: Cohort::new(test),
    })
}
