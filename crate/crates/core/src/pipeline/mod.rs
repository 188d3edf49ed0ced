//! Model kinds, fitting of any kind behind one interface, and the checkpoint
//! container that persists them.

mod checkpoint;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};

use crate::aam::Aam;
use crate::baselines::{
    choose_orientation, mean_agg_score, rf_predict, search_forest, LogisticHead, Orientation, RfModel,
};
use crate::dataset::Metric;
use crate::error::{Error, Result};
use crate::training::{
    labels, search_aam, select_threshold, EpochRecord, Prepared, TrainingData,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Aam,
    AamDemo,
    MeanAgg,
    MeanAggDemo,
    RfDemo,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Aam,
        ModelKind::AamDemo,
        ModelKind::MeanAgg,
        ModelKind::MeanAggDemo,
        ModelKind::RfDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Aam => "aam",
            ModelKind::AamDemo => "aam_demo",
            ModelKind::MeanAgg => "mean_agg",
            ModelKind::MeanAggDemo => "mean_agg_demo",
            ModelKind::RfDemo => "rf_demo",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum FittedModel {
    Aam(Aam),
    MeanAgg(Orientation),
    MeanAggDemo(LogisticHead),
    Forest(RfModel),
}

fn logistic_inputs(p: &Prepared) -> [f64; 3] {
    [mean_agg_score(&p.features), p.demographics.age_norm, p.demographics.sex]
}

impl FittedModel {
    pub fn score(&self, p: &Prepared) -> Result<f64> {
        match self {
            FittedModel::Aam(model) => crate::training::score_aam(model, p),
            FittedModel::MeanAgg(o) => Ok(o.apply(mean_agg_score(&p.features))),
            FittedModel::MeanAggDemo(head) => Ok(head.predict(logistic_inputs(p))),
            FittedModel::Forest(forest) => Ok(rf_predict(forest, p.age as f64, p.demographics.sex as u8)),
        }
    }

    pub fn score_all(&self, fold: &[Prepared]) -> Result<Vec<f64>> {
        fold.iter().map(|p| self.score(p)).collect()
    }
}

/// What fitting produced besides the checkpoint.
#[derive(Clone, Debug, Default)]
pub struct FitLog {
    /// Per-epoch history of the selected model (attention models only).
    pub history: Vec<EpochRecord>,
    /// One JSON object per search trial.
    pub trials: Vec<serde_json::Value>,
}

/// Fits `kind` on the training fold, selects among search trials and picks
/// the decision threshold on the validation fold.
pub fn fit_model(
    kind: ModelKind,
    data: &TrainingData,
    budget: usize,
    seed: u64,
) -> Result<(Checkpoint, FitLog)> {
    let mut log = FitLog::default();
    let model = match kind {
        ModelKind::Aam | ModelKind::AamDemo => {
            let search = search_aam(data, kind == ModelKind::AamDemo, budget, seed)?;
            log.trials = search.trials.iter().map(serde_json::to_value).collect::<std::result::Result<_, _>>()?;
            log.history = search.best_model.history.clone();
            FittedModel::Aam(search.best_model.model)
        }
        ModelKind::MeanAgg => {
            let scores: Vec<f64> = data.validation.iter().map(|p| mean_agg_score(&p.features)).collect();
            FittedModel::MeanAgg(choose_orientation(&scores, &labels(&data.validation)))
        }
        ModelKind::MeanAggDemo => {
            let inputs: Vec<[f64; 3]> = data.train.iter().map(logistic_inputs).collect();
            FittedModel::MeanAggDemo(LogisticHead::fit(&inputs, &labels(&data.train))?.head)
        }
        ModelKind::RfDemo => {
            let search = search_forest(&data.train, &data.validation, budget, seed)?;
            log.trials = search.trials.iter().map(serde_json::to_value).collect::<std::result::Result<_, _>>()?;
            FittedModel::Forest(search.best_model)
        }
    };
    let val_scores = model.score_all(&data.validation)?;
    let threshold = select_threshold(&val_scores, &labels(&data.validation));
    let checkpoint = Checkpoint {
        kind,
        model,
        normalizer: data.normalizer.clone(),
        vocabulary: Metric::vocabulary(),
        seed,
        threshold,
        k_max: data.k_max,
        train_ids: data.train.iter().map(|p| p.id.clone()).collect(),
        validation_ids: data.validation.iter().map(|p| p.id.clone()).collect(),
    };
    Ok((checkpoint, log))
}
