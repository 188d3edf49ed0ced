use log::warn;
use serde::{Deserialize, Serialize};

use super::{Cohort, Metric, Participant, METRIC_COUNT};
use crate::error::{Error, Result};

/// `t ‖ one-hot(metric) ‖ s`.
pub const FEATURE_DIM: usize = 1 + METRIC_COUNT + 1;

/// Training-fold statistics used to scale features into [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Per metric `(min, max)`, indexed by [`Metric::index`].
    pub ranges: Vec<(f64, f64)>,
    /// Largest gap between consecutive tests, in seconds.
    pub t_max: f64,
}

impl Normalizer {
    pub fn scale_value(&self, metric: Metric, value: f64) -> f64 {
        let (lo, hi) = self.ranges[metric.index()];
        if hi == lo {
            return 0.5;
        }
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn scale_gap(&self, seconds: f64) -> f64 {
        (seconds / self.t_max).clamp(0.0, 1.0)
    }
}

pub fn fit_normalizer(train: &Cohort) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::Empty("training fold"));
    }
    let mut ranges: Vec<Option<(f64, f64)>> = vec![None; METRIC_COUNT];
    let mut t_max = 0.0f64;
    for p in train {
        for r in &p.results {
            let slot = &mut ranges[r.metric.index()];
            *slot = Some(match *slot {
                None => (r.value, r.value),
                Some((lo, hi)) => (lo.min(r.value), hi.max(r.value)),
            });
        }
        for pair in p.results.windows(2) {
            t_max = t_max.max((pair[1].timestamp - pair[0].timestamp) as f64);
        }
    }
    let ranges = ranges
        .into_iter()
        .zip(Metric::ALL)
        .map(|(range, metric)| {
            range.unwrap_or_else(|| {
                warn!("metric `{metric}` never observed in the training fold; using (0, 1)");
                (0.0, 1.0)
            })
        })
        .collect();
    if t_max <= 0.0 {
        t_max = 1.0;
    }
    Ok(Normalizer { ranges, t_max })
}

/// Per-test feature vectors of one participant, row-major `k × FEATURE_DIM`.
/// Row `i` corresponds to `participant.results[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn from_rows(rows: &[[f64; FEATURE_DIM]]) -> Self {
        Self {
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / FEATURE_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(FEATURE_DIM)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Normalized score component of every row.
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(|r| r[FEATURE_DIM - 1])
    }

    /// Reorders rows; `order[i]` is the source row of output row `i`.
    pub fn permuted(&self, order: &[usize]) -> FeatureSequence {
        assert_eq!(order.len(), self.len());
        FeatureSequence {
            data: order.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }
}

pub fn build_features(participant: &Participant, normalizer: &Normalizer) -> FeatureSequence {
    let mut data = Vec::with_capacity(participant.results.len() * FEATURE_DIM);
    let mut previous: Option<i64> = None;
    for r in &participant.results {
        let gap = previous.map_or(0.0, |prev| normalizer.scale_gap((r.timestamp - prev) as f64));
        previous = Some(r.timestamp);
        data.push(gap);
        let mut one_hot = [0.0; METRIC_COUNT];
        one_hot[r.metric.index()] = 1.0;
        data.extend_from_slice(&one_hot);
        data.push(normalizer.scale_value(r.metric, r.value));
    }
    FeatureSequence { data }
}

/// Keeps the earliest `k_max` tests.
pub fn truncate(features: &FeatureSequence, k_max: usize) -> FeatureSequence {
    assert!(k_max >= 1, "k_max must be at least 1");
    let keep = features.len().min(k_max) * FEATURE_DIM;
    FeatureSequence {
        data: features.data[..keep].to_vec(),
    }
}
