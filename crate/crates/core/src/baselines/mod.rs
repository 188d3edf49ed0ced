//! Reference models: mean of normalized scores, a logistic head over the mean
//! and demographics, and a random forest on age and sex only.

mod forest;
mod logistic;
mod mean;

pub use forest::{
    bootstrap_sample, fit_random_forest, grow_tree, rf_predict, search_forest, DecisionTree, Node, RfConfig, RfModel,
    RfSample, Split, MAX_DEPTHS, TREE_COUNTS,
};
pub use logistic::{LogisticFit, LogisticHead, MAX_ITERATIONS};
pub use mean::{choose_orientation, mean_agg_score, Orientation};
