use crate::evaluation::Confusion;

/// Decision threshold maximizing F1 on validation scores.
///
/// Thresholds between two consecutive distinct scores yield the same
/// confusion matrix, so each interval is represented by its point closest
/// to 0.5. Ties in F1 go to the candidate closest to 0.5. With a single
/// distinct score no threshold discriminates and 0.5 is returned.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    let mut distinct: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return 0.5;
    }

    // intervals (lo, hi]; a threshold t in it calls every score >= t positive
    let mut bounds = Vec::with_capacity(distinct.len() + 1);
    bounds.push((f64::NEG_INFINITY, distinct[0]));
    for w in distinct.windows(2) {
        bounds.push((w[0], w[1]));
    }
    bounds.push((distinct[distinct.len() - 1], f64::INFINITY));

    let mut best: Option<(f64, f64)> = None;
    for (lo, hi) in bounds {
        let candidate = if lo < 0.5 && 0.5 <= hi {
            0.5
        } else if hi < 0.5 {
            hi
        } else {
            lo.next_up()
        };
        let f1 = Confusion::at(scores, labels, candidate).f1();
        let better = match best {
            None => true,
            Some((bf1, bt)) => f1 > bf1 || (f1 == bf1 && (candidate - 0.5).abs() < (bt - 0.5).abs()),
        };
        if better {
            best = Some((f1, candidate));
        }
    }
    best.map(|(_, t)| t).unwrap_or(0.5)
}
