use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score {i} is NaN")));
    }
    let positives = labels.iter().filter(|l| **l).count();
    Ok((positives, labels.len() - positives))
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Area under the ROC curve: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, via mid-ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("roc_auc needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: Σ ΔRecall · Precision over descending score thresholds,
/// with tied scores sharing one threshold.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_inputs(scores, labels)?;
    if pos == 0 {
        return Err(Error::invalid("aupr needs at least one positive"));
    }
    let order = descending(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut gained = 0usize;
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                gained += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        tp += gained;
        if gained > 0 {
            area += gained as f64 / pos as f64 * tp as f64 / (tp + fp) as f64;
        }
    }
    Ok(area)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    /// A score at or above the threshold is a positive call.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (s, l) in scores.iter().zip(labels) {
            match (*s >= threshold, *l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.r#fn += 1,
            }
        }
        c
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn f1(&self) -> f64 {
        Self::ratio(2 * self.tp, 2 * self.tp + self.fp + self.r#fn)
    }

    pub fn metrics(&self) -> ConfusionMetrics {
        ConfusionMetrics {
            f1: self.f1(),
            sensitivity: Self::ratio(self.tp, self.tp + self.r#fn),
            specificity: Self::ratio(self.tn, self.tn + self.fp),
        }
    }
}

pub fn confusion_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMetrics> {
    check_inputs(scores, labels)?;
    Ok(Confusion::at(scores, labels, threshold).metrics())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC operating points from the strictest threshold downwards.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_inputs(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("roc_curve needs both classes"));
    }
    let order = descending(scores);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                if *li && !*lj {
                    pairs += 1.0;
                    total += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn auc_examples() {
        let labels = [true, false, true, false];
        assert_eq!(roc_auc(&[0.9, 0.1, 0.8, 0.2], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 4], &labels).unwrap(), 0.5);
        let (s, l) = ([0.9, 0.8, 0.3], [true, false, true]);
        assert_eq!(pairwise_auc(&s, &l), 0.5);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&[0.9, 0.1, 0.8, 0.2], &[true, false, true, false]).unwrap(), 1.0);
        assert!(aupr(&[0.9], &[false]).is_err());
        // 4-point toy: descending 0.9(+) 0.7(-) 0.5(+) 0.2(-)
        // recall steps 1/2 at precision 1, 1/2 at precision 2/3
        let v = aupr(&[0.5, 0.9, 0.2, 0.7], &[true, true, false, false]).unwrap();
        assert!((v - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);

        let mut rng = seed::rng(21);
        let n = 2000;
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let prevalence = labels.iter().filter(|l| **l).count() as f64 / n as f64;
        assert!((aupr(&scores, &labels).unwrap() - prevalence).abs() < 0.05);
    }

    #[test]
    fn confusion_examples() {
        let m = confusion_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, false, true, false], 0.5).unwrap();
        assert_eq!((m.f1, m.sensitivity, m.specificity), (0.5, 0.5, 0.5));
        let m = confusion_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, false, true, false], 2.0).unwrap();
        assert_eq!((m.f1, m.sensitivity, m.specificity), (0.0, 0.0, 1.0));

        // 10-point toy counted by hand at threshold 0.5:
        // positives with score >= 0.5: 0.95, 0.6, 0.5 -> TP 3; positives below: 0.3 -> FN 1
        // negatives >= 0.5: 0.7 -> FP 1; negatives below: 0.45, 0.4, 0.2, 0.1, 0.05 -> TN 5
        let scores = [0.95, 0.7, 0.6, 0.5, 0.45, 0.4, 0.3, 0.2, 0.1, 0.05];
        let labels = [true, false, true, true, false, false, true, false, false, false];
        let c = Confusion::at(&scores, &labels, 0.5);
        assert_eq!(c, Confusion { tp: 3, fp: 1, tn: 5, r#fn: 1 });
        let m = c.metrics();
        assert!((m.f1 - 6.0 / 8.0).abs() < 1e-15);
        assert!((m.sensitivity - 0.75).abs() < 1e-15);
        assert!((m.specificity - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn roc_curve_ends_at_corner() {
        let pts = roc_curve(&[0.9, 0.1, 0.8, 0.2], &[true, false, true, false]).unwrap();
        assert_eq!(pts.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(pts.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }
}
