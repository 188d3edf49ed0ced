use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSequence;
use crate::training::auc_or_chance;

/// Mean of the normalized value components; 0.5 for an empty history.
pub fn mean_agg_score(features: &FeatureSequence) -> f64 {
    if features.is_empty() {
        return 0.5;
    }
    features.scores().sum::<f64>() / features.len() as f64
}

/// Whether a higher mean score means higher risk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Direct,
    Flipped,
}

impl Orientation {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Orientation::Direct => y,
            Orientation::Flipped => 1.0 - y,
        }
    }
}

/// Keeps whichever of `y` and `1 − y` has the higher validation AUC; direct
/// on ties.
pub fn choose_orientation(scores: &[f64], labels: &[bool]) -> Orientation {
    let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    if auc_or_chance(&flipped, labels) > auc_or_chance(scores, labels) {
        Orientation::Flipped
    } else {
        Orientation::Direct
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FEATURE_DIM;

    fn with_scores(s: &[f64]) -> FeatureSequence {
        let rows: Vec<[f64; FEATURE_DIM]> = s
            .iter()
            .map(|v| {
                let mut r = [0.0; FEATURE_DIM];
                r[1] = 1.0;
                r[FEATURE_DIM - 1] = *v;
                r
            })
            .collect();
        FeatureSequence::from_rows(&rows)
    }

    #[test]
    fn examples() {
        assert_eq!(mean_agg_score(&with_scores(&[0.5; 7])), 0.5);
        assert_eq!(mean_agg_score(&with_scores(&[0.0, 1.0])), 0.5);
        assert_eq!(mean_agg_score(&with_scores(&[])), 0.5);
        let fs = with_scores(&[0.1, 0.4, 0.9, 0.2]);
        let perm = fs.permuted(&[3, 1, 0, 2]);
        assert!((mean_agg_score(&fs) - mean_agg_score(&perm)).abs() < 1e-15);
    }

    #[test]
    fn orientation_follows_validation_auc() {
        let labels = [true, false, true, false];
        assert_eq!(choose_orientation(&[0.9, 0.1, 0.8, 0.2], &labels), Orientation::Direct);
        assert_eq!(choose_orientation(&[0.1, 0.9, 0.2, 0.8], &labels), Orientation::Flipped);
        assert_eq!(choose_orientation(&[0.5; 4], &labels), Orientation::Direct);
        assert_eq!(Orientation::Flipped.apply(0.3), 0.7);
    }
}
