//! Attentive aggregation of irregular smartphone test histories.
//!
//! The crate covers the whole experimental pipeline: cohort ingestion and
//! feature construction ([`dataset`]), the attention model ([`aam`]) and its
//! training harness ([`training`]), reference models ([`baselines`]),
//! evaluation statistics and experiments ([`evaluation`]), and a synthetic
//! cohort generator with a planted diagnostic signal ([`synth`]).

pub mod aam;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod numeric;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod training;

pub use aam::{Aam, AamHyperparams, AamParams, Demographics, Prediction};
pub use dataset::{
    Cohort, FeatureSequence, Folds, Metric, Normalizer, Participant, TestResult, TestType,
};
pub use error::{Error, Result};
pub use evaluation::MetricsReport;
pub use pipeline::{Checkpoint, FittedModel, ModelKind};
pub use synth::SynthConfig;
pub use training::{TrainConfig, TrainingData};
