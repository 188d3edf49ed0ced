//! Discrimination metrics, resampling statistics and the experiment drivers
//! built on them.

pub mod attention;
pub mod bootstrap;
pub mod experiments;
pub mod metrics;
pub mod mww;
pub mod report;

pub use attention::{attention_timeline, export_attention, AttentionEntry, AttentionTimeline, TOP_INSTANCES};
pub use bootstrap::{bootstrap_ci, bootstrap_distribution, BootstrapDistribution, DEFAULT_RESAMPLES};
pub use experiments::{ablate_test_types, fit_fixed, sweep_max_tests, AblationReport, AblationRow, FixedSetup, SWEEP_K};
pub use metrics::{aupr, confusion_metrics, roc_auc, roc_curve, Confusion, ConfusionMetrics, RocPoint};
pub use mww::{bonferroni, mann_whitney_u, mww_exact, mww_normal, mww_test};
pub use report::{
    compare_distributions, evaluate_scores, line_chart_svg, write_roc_csv, write_table, Comparison, Estimate,
    Evaluation, MetricsReport, TableRow, REPORT_METRICS,
};
