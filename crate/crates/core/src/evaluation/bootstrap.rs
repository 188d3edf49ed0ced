use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::nearest_rank_quantile;
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 1000;
const MAX_RETRIES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    /// Metric value per kept resample, in resample order.
    pub values: Vec<f64>,
    /// Resamples abandoned after exhausting retries on single-class draws.
    pub dropped: usize,
}

impl BootstrapDistribution {
    /// 2.5th and 97.5th nearest-rank percentiles.
    pub fn interval(&self) -> (f64, f64) {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        (
            nearest_rank_quantile(&sorted, 0.025),
            nearest_rank_quantile(&sorted, 0.975),
        )
    }
}

/// Resamples participants with replacement `n_boot` times and evaluates
/// `metric` on each resample. Resample `b` depends only on `(seed, b)`.
pub fn bootstrap_distribution<F>(
    metric: F,
    scores: &[f64],
    labels: &[bool],
    n_boot: usize,
    seed_value: u64,
) -> Result<BootstrapDistribution>
where
    F: Fn(&[f64], &[bool]) -> Result<f64> + Sync,
{
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Shape(format!(
            "bootstrap over {} scores and {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n = scores.len();
    let draws: Vec<Result<Option<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::derived_rng(seed_value, seed::Stream::Bootstrap, b as u64);
            let mut s = vec![0.0; n];
            let mut l = vec![false; n];
            for _ in 0..=MAX_RETRIES {
                for i in 0..n {
                    let j = rng.random_range(0..n);
                    s[i] = scores[j];
                    l[i] = labels[j];
                }
                let positives = l.iter().filter(|x| **x).count();
                if positives > 0 && positives < n {
                    return metric(&s, &l).map(Some);
                }
            }
            Ok(None)
        })
        .collect();

    let mut values = Vec::with_capacity(n_boot);
    let mut dropped = 0;
    for d in draws {
        match d? {
            Some(v) => values.push(v),
            None => dropped += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::invalid("every bootstrap resample was single-class"));
    }
    Ok(BootstrapDistribution { values, dropped })
}

pub fn bootstrap_ci<F>(
    metric: F,
    scores: &[f64],
    labels: &[bool],
    n_boot: usize,
    seed_value: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64], &[bool]) -> Result<f64> + Sync,
{
    Ok(bootstrap_distribution(metric, scores, labels, n_boot, seed_value)?.interval())
}
