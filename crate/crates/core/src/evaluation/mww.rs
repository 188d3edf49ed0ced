//! Mann-Whitney-Wilcoxon rank-sum test and Bonferroni adjustment.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Below this size in either group the exact permutation distribution is used.
pub const EXACT_BELOW: usize = 20;

/// Mid-ranks of the pooled sample (1-based), doubled so ties stay integral.
fn doubled_ranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&x, &y| pooled[x].total_cmp(&pooled[y]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // doubled mean of ranks i+1 ..= j+1
        let doubled = (i + j + 2) as u64;
        for &idx in &order[i..=j] {
            ranks[idx] = doubled;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    (ranks, tie_sizes)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("mww sample"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("mww sample contains NaN".into()));
    }
    Ok(())
}

/// `U` statistic of the first sample.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, _) = doubled_ranks(a, b);
    let doubled_sum: u64 = ranks[..a.len()].iter().sum();
    let na = a.len() as f64;
    doubled_sum as f64 / 2.0 - na * (na + 1.0) / 2.0
}

/// Two-sided p-value by exact enumeration of the permutation distribution of
/// the rank sum (tie-aware).
pub fn mww_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let (ranks, _) = doubled_ranks(a, b);
    let na = a.len();
    let total_n = ranks.len();
    let observed: u64 = ranks[..na].iter().sum();
    let max_sum: u64 = ranks.iter().sum();

    // ways[c][s]: subsets of size c with doubled rank sum s
    let width = max_sum as usize + 1;
    let mut ways = vec![vec![0.0f64; width]; na + 1];
    ways[0][0] = 1.0;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for c in (1..=na.min(seen + 1)).rev() {
            let (lower, upper) = ways.split_at_mut(c);
            let prev = &lower[c - 1];
            let cur = &mut upper[0];
            for s in (r..width).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    // E[doubled sum] = na (N + 1)
    let center = (na * (total_n + 1)) as i64;
    let distance = (observed as i64 - center).abs();
    let total: f64 = ways[na].iter().sum();
    let extreme: f64 = ways[na]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - center).abs() >= distance)
        .map(|(_, w)| w)
        .sum();
    Ok((extreme / total).min(1.0))
}

/// Two-sided p-value from the normal approximation with tie and continuity
/// corrections.
pub fn mww_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let (_, ties) = doubled_ranks(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let u = mann_whitney_u(a, b);
    let mean = na * nb / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if variance <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Exact path when either sample is smaller than [`EXACT_BELOW`], normal
/// approximation otherwise.
pub fn mww_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len().min(b.len()) < EXACT_BELOW {
        mww_exact(a, b)
    } else {
        mww_normal(a, b)
    }
}

pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|p| (p * m).min(1.0)).collect())
}
