use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_distribution, BootstrapDistribution};
use super::metrics::{aupr, roc_auc, Confusion, RocPoint};
use super::mww::{bonferroni, mww_test};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    pub fn contains_point(&self) -> bool {
        self.ci_lo <= self.point && self.point <= self.ci_hi
    }
}

pub const REPORT_METRICS: [&str; 5] = ["auc", "aupr", "f1", "sensitivity", "specificity"];

/// Point estimates with bootstrap intervals for one model on one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub seed: u64,
    pub threshold: f64,
    pub n_test: usize,
    pub auc: Estimate,
    pub aupr: Estimate,
    pub f1: Estimate,
    pub sensitivity: Estimate,
    pub specificity: Estimate,
    pub bootstrap_resamples: usize,
    pub dropped_resamples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn estimates(&self) -> [(&'static str, Estimate); 5] {
        [
            ("auc", self.auc),
            ("aupr", self.aupr),
            ("f1", self.f1),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
        ]
    }

    /// Share of metrics whose interval contains the point estimate.
    pub fn containment_rate(&self) -> f64 {
        let e = self.estimates();
        e.iter().filter(|(_, x)| x.contains_point()).count() as f64 / e.len() as f64
    }
}

/// A report plus the per-metric bootstrap distributions behind it.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub distributions: Vec<(&'static str, BootstrapDistribution)>,
}

impl Evaluation {
    pub fn distribution(&self, metric: &str) -> Option<&BootstrapDistribution> {
        self.distributions.iter().find(|(m, _)| *m == metric).map(|(_, d)| d)
    }
}

type MetricFn = Box<dyn Fn(&[f64], &[bool]) -> Result<f64> + Sync>;

fn metric_fns(threshold: f64) -> [(&'static str, MetricFn); 5] {
    let confusion = move |f: fn(&Confusion) -> f64| -> MetricFn {
        Box::new(move |s: &[f64], l: &[bool]| Ok(f(&Confusion::at(s, l, threshold))))
    };
    [
        ("auc", Box::new(roc_auc)),
        ("aupr", Box::new(aupr)),
        ("f1", confusion(|c| c.f1())),
        ("sensitivity", confusion(|c| c.metrics().sensitivity)),
        ("specificity", confusion(|c| c.metrics().specificity)),
    ]
}

/// Every resample is shared across metrics: resample `b` depends only on
/// `(seed, b)`.
pub fn evaluate_scores(
    model: &str,
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    n_boot: usize,
    seed: u64,
) -> Result<Evaluation> {
    let mut estimates = Vec::with_capacity(5);
    let mut distributions = Vec::with_capacity(5);
    let mut dropped = 0;
    for (name, f) in metric_fns(threshold) {
        let point = f(scores, labels)?;
        let dist = bootstrap_distribution(&f, scores, labels, n_boot, seed)?;
        let (ci_lo, ci_hi) = dist.interval();
        dropped = dropped.max(dist.dropped);
        estimates.push(Estimate { point, ci_lo, ci_hi });
        distributions.push((name, dist));
    }
    Ok(Evaluation {
        report: MetricsReport {
            model: model.to_string(),
            seed,
            threshold,
            n_test: scores.len(),
            auc: estimates[0],
            aupr: estimates[1],
            f1: estimates[2],
            sensitivity: estimates[3],
            specificity: estimates[4],
            bootstrap_resamples: n_boot,
            dropped_resamples: dropped,
            warnings: Vec::new(),
        },
        distributions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub reference: String,
    pub model: String,
    pub p_value: f64,
    pub p_adjusted: f64,
}

/// Rank-sum tests of each model's bootstrap distribution against the
/// reference's, Bonferroni-adjusted over the family.
pub fn compare_distributions(
    metric: &str,
    reference: (&str, &BootstrapDistribution),
    others: &[(&str, &BootstrapDistribution)],
) -> Result<Vec<Comparison>> {
    let raw = others
        .iter()
        .map(|(_, d)| mww_test(&reference.1.values, &d.values))
        .collect::<Result<Vec<f64>>>()?;
    let adjusted = bonferroni(&raw)?;
    Ok(others
        .iter()
        .zip(raw.iter().zip(adjusted))
        .map(|((name, _), (p, adj))| Comparison {
            metric: metric.to_string(),
            reference: reference.0.to_string(),
            model: name.to_string(),
            p_value: *p,
            p_adjusted: adj,
        })
        .collect())
}

/// One line of the sweep and ablation tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub k_max: usize,
    pub metric: String,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl TableRow {
    pub fn new(model: impl Into<String>, k_max: usize, metric: &str, e: Estimate) -> Self {
        Self {
            model: model.into(),
            k_max,
            metric: metric.to_string(),
            point: e.point,
            ci_lo: e.ci_lo,
            ci_hi: e.ci_hi,
        }
    }
}

/// CSV with header `model,k_max,metric,point,ci_lo,ci_hi`.
pub fn write_table<W: Write>(rows: &[TableRow], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    if rows.is_empty() {
        w.write_record(["model", "k_max", "metric", "point", "ci_lo", "ci_hi"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal SVG line chart; both axes span [0, 1] unless the data exceed it.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];
    let finite = series.iter().flat_map(|(_, pts)| pts.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x_max, mut y_max) = (1.0f64, 1.0f64);
    let mut any = false;
    for (x, y) in finite {
        x_max = x_max.max(*x);
        y_max = y_max.max(*y);
        any = true;
    }
    if !any {
        return Err(Error::Empty("chart data"));
    }
    let sx = |x: f64| M + x / x_max * (W - 2.0 * M);
    let sy = |y: f64| H - M - y / y_max * (H - 2.0 * M);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{M},{} L{M},{} L{},{}" fill="none" stroke="black"/>"#,
        M,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, xml_escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        xml_escape(y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, coords.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - M - 110.0,
            M + 14.0 * i as f64,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
