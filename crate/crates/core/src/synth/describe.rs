use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Cohort;
use crate::error::{Error, Result};
use crate::numeric::nearest_rank_quantile;

/// Row labels of the rendered table; its columns are `Property` and then one
/// per fold.
pub const TABLE_PROPERTIES: [&str; 5] = ["Subjects (#)", "MS (%)", "Female (%)", "Age (years)", "Usage (days)"];

/// Median with 10% and 90% nearest-rank quantiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl QuantileSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("quantile sample"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            median: nearest_rank_quantile(&sorted, 0.5),
            q10: nearest_rank_quantile(&sorted, 0.1),
            q90: nearest_rank_quantile(&sorted, 0.9),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: String,
    pub subjects: usize,
    /// Share of all summarized subjects, in percent.
    pub subjects_pct: f64,
    pub ms_pct: f64,
    pub female_pct: f64,
    pub age: QuantileSummary,
    pub usage_days: QuantileSummary,
}

/// One row per named cohort. Fails on an empty cohort.
pub fn describe_cohort(folds: &[(&str, &Cohort)]) -> Result<Vec<FoldSummary>> {
    let total: usize = folds.iter().map(|(_, c)| c.len()).sum();
    folds
        .iter()
        .map(|(name, cohort)| {
            if cohort.is_empty() {
                return Err(Error::invalid(format!("cannot describe empty fold `{name}`")));
            }
            let n = cohort.len() as f64;
            let ages: Vec<f64> = cohort.iter().map(|p| p.age as f64).collect();
            let usage: Vec<f64> = cohort.iter().map(|p| p.usage_days()).collect();
            Ok(FoldSummary {
                fold: name.to_string(),
                subjects: cohort.len(),
                subjects_pct: 100.0 * n / total as f64,
                ms_pct: 100.0 * cohort.prevalence(),
                female_pct: 100.0 * cohort.iter().filter(|p| p.sex == 1).count() as f64 / n,
                age: QuantileSummary::of(&ages)?,
                usage_days: QuantileSummary::of(&usage)?,
            })
        })
        .collect()
}

fn quantiles(q: &QuantileSummary) -> String {
    format!("{:.1} ({:.1}, {:.1})", q.median, q.q10, q.q90)
}

/// Pipe-separated table: a `Property | fold ...` header, then one row per
/// entry of [`TABLE_PROPERTIES`].
pub fn render_table(folds: &[FoldSummary]) -> String {
    let mut out = String::from("Property");
    for f in folds {
        let _ = write!(out, " | {}", f.fold);
    }
    out.push('\n');
    let cells: [fn(&FoldSummary) -> String; 5] = [
        |f| format!("{} ({:.0}%)", f.subjects, f.subjects_pct),
        |f| format!("{:.1}", f.ms_pct),
        |f| format!("{:.1}", f.female_pct),
        |f| quantiles(&f.age),
        |f| quantiles(&f.usage_days),
    ];
    for (label, cell) in TABLE_PROPERTIES.iter().zip(&cells) {
        out.push_str(label);
        for f in folds {
            let _ = write!(out, " | {}", cell(f));
        }
        out.push('\n');
    }
    out
}
