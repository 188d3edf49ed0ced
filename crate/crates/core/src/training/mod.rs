//! Minibatch training of the attention model with early stopping, random
//! hyperparameter search and decision-threshold selection.

mod adam;
mod early_stopping;
mod search;
mod threshold;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use early_stopping::{fit_with_early_stopping, write_history, EpochRecord, EpochRunner, Stopped};
pub use search::{random_search, sample_aam_trial, search_aam, AamTrial, SearchOutcome, TrialRecord};
pub use threshold::select_threshold;

use crate::aam::{Aam, AamHyperparams, Demographics, Example};
use crate::dataset::{build_features, fit_normalizer, truncate, Cohort, FeatureSequence, Normalizer};
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::numeric::sigmoid;
use crate::seed::{self, Stream};

pub const BATCH_SIZES: [usize; 3] = [16, 32, 64];
pub const LEARNING_RATE: f64 = 0.003;
pub const MAX_EPOCHS: usize = 300;
pub const PATIENCE: usize = 32;
pub const DEFAULT_K_MAX: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        Self {
            batch_size,
            learning_rate: LEARNING_RATE,
            max_epochs: MAX_EPOCHS,
            patience: PATIENCE,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !BATCH_SIZES.contains(&self.batch_size) {
            return Err(Error::invalid(format!(
                "batch size must be one of {BATCH_SIZES:?}, got {}",
                self.batch_size
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("learning rate, epochs and patience must be positive"));
        }
        Ok(())
    }
}

/// A participant reduced to model inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub id: String,
    /// Truncated to the run's `k_max`; may be empty after test-type removal.
    pub features: FeatureSequence,
    /// Years.
    pub age: u32,
    pub demographics: Demographics,
    pub label: bool,
}

pub fn prepare(cohort: &Cohort, normalizer: &Normalizer, k_max: usize) -> Result<Vec<Prepared>> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    Ok(cohort
        .iter()
        .map(|p| Prepared {
            id: p.id.clone(),
            features: truncate(&build_features(p, normalizer), k_max),
            age: p.age,
            demographics: Demographics::of(p),
            label: p.has_ms,
        })
        .collect())
}

pub fn labels(prepared: &[Prepared]) -> Vec<bool> {
    prepared.iter().map(|p| p.label).collect()
}

/// AUC that degrades to 0.5 when only one class is present.
pub fn auc_or_chance(scores: &[f64], labels: &[bool]) -> f64 {
    roc_auc(scores, labels).unwrap_or(0.5)
}

/// Training and validation folds, normalized with training-fold statistics.
/// The test fold is deliberately absent.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub normalizer: Normalizer,
    pub k_max: usize,
    pub train: Vec<Prepared>,
    pub validation: Vec<Prepared>,
}

impl TrainingData {
    pub fn new(train: &Cohort, validation: &Cohort, k_max: usize) -> Result<Self> {
        let normalizer = fit_normalizer(train)?;
        Ok(Self {
            train: prepare(train, &normalizer, k_max)?,
            validation: prepare(validation, &normalizer, k_max)?,
            normalizer,
            k_max,
        })
    }
}

fn demographics_for(model: &Aam, p: &Prepared) -> Option<Demographics> {
    model.hyper.use_demographics.then_some(p.demographics)
}

/// Inference score; an empty history scores 0.5.
pub fn score_aam(model: &Aam, p: &Prepared) -> Result<f64> {
    if p.features.is_empty() {
        return Ok(0.5);
    }
    Ok(model.predict(&p.features, demographics_for(model, p))?.score)
}

/// Mean validation BCE (no penalty) and validation scores.
fn evaluate_fold(model: &Aam, fold: &[Prepared]) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut scores = Vec::with_capacity(fold.len());
    for p in fold {
        let logit = if p.features.is_empty() {
            0.0
        } else {
            model.logit(&p.features, demographics_for(model, p))?
        };
        total += Aam::bce(logit, if p.label { 1.0 } else { 0.0 });
        scores.push(sigmoid(logit));
    }
    Ok((total / fold.len().max(1) as f64, scores))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Aam,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub diverged: bool,
}

struct AamRunner<'a> {
    model: Aam,
    adam: Adam,
    data: &'a TrainingData,
    config: TrainConfig,
    usable: Vec<usize>,
    batches_seen: u64,
}

impl EpochRunner for AamRunner<'_> {
    type Snapshot = Aam;

    fn snapshot(&self) -> Aam {
        self.model.clone()
    }

    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let mut order = self.usable.clone();
        order.shuffle(&mut seed::derived_rng(self.config.seed, Stream::Shuffle, epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&i| {
                    let p = &self.data.train[i];
                    Example {
                        features: &p.features,
                        demographics: demographics_for(&self.model, p),
                        label: if p.label { 1.0 } else { 0.0 },
                    }
                })
                .collect();
            let dropout_seed = seed::derive(self.config.seed, Stream::Dropout, self.batches_seen);
            self.batches_seen += 1;
            let (loss, grads) = self.model.loss_and_gradients(&batch, Some(dropout_seed))?;
            total += loss * chunk.len() as f64;
            let params = &mut self.model.params;
            self.adam.step(
                params.tensors_mut(),
                grads.tensors().into_iter().map(|(t, _)| t).collect(),
            );
        }
        let (val_loss, scores) = evaluate_fold(&self.model, &self.data.validation)?;
        Ok(EpochRecord {
            epoch,
            train_loss: total / order.len() as f64,
            val_loss,
            val_auc: auc_or_chance(&scores, &labels(&self.data.validation)),
        })
    }
}

/// Trains from a seeded initialization and returns the best-validation-loss
/// parameters.
pub fn train(data: &TrainingData, hyper: AamHyperparams, config: TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.validation.is_empty() {
        return Err(Error::Empty("validation fold"));
    }
    let usable: Vec<usize> = (0..data.train.len())
        .filter(|&i| !data.train[i].features.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("training fold"));
    }
    let mut runner = AamRunner {
        model: Aam::init(hyper, config.seed)?,
        adam: Adam::new(config.learning_rate),
        data,
        config,
        usable,
        batches_seen: 0,
    };
    let stopped = fit_with_early_stopping(&mut runner, config.max_epochs, config.patience)?;
    Ok(TrainOutcome {
        model: stopped.best,
        best_epoch: stopped.best_epoch,
        history: stopped.history,
        diverged: stopped.diverged,
    })
}

/// Scores every participant of a fold.
pub fn score_fold(model: &Aam, fold: &[Prepared]) -> Result<Vec<f64>> {
    fold.iter().map(|p| score_aam(model, p)).collect()
}
