use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc_or_chance, labels, score_fold, train, TrainConfig, TrainOutcome, TrainingData, BATCH_SIZES};
use crate::aam::AamHyperparams;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<C> {
    pub index: usize,
    pub seed: u64,
    pub config: C,
    pub val_auc: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome<C, M> {
    pub trials: Vec<TrialRecord<C>>,
    pub best_index: usize,
    pub best_model: M,
}

impl<C, M> SearchOutcome<C, M> {
    pub fn best(&self) -> &TrialRecord<C> {
        &self.trials[self.best_index]
    }
}

/// Samples `budget` configurations from one seeded stream, fits each with its
/// own derived seed and keeps the highest validation AUC (earliest on ties).
pub fn random_search<C, M, S, F>(budget: usize, master: u64, mut sample: S, fit: F) -> Result<SearchOutcome<C, M>>
where
    C: Send + Sync,
    M: Send,
    S: FnMut(&mut ChaCha8Rng) -> C,
    F: Fn(&C, u64) -> Result<(f64, M)> + Sync,
{
    if budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    let mut rng = seed::derived_rng(master, Stream::Search, 0);
    let configs: Vec<C> = (0..budget).map(|_| sample(&mut rng)).collect();
    let fitted: Vec<Result<(f64, M)>> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| fit(c, seed::derive(master, Stream::Trial, i as u64)))
        .collect();

    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64, M)> = None;
    for (index, (config, result)) in configs.into_iter().zip(fitted).enumerate() {
        let (val_auc, model) = result?;
        log::info!("trial {index}: validation AUC {val_auc:.4}");
        trials.push(TrialRecord {
            index,
            seed: seed::derive(master, Stream::Trial, index as u64),
            config,
            val_auc,
        });
        if best.as_ref().is_none_or(|(_, auc, _)| val_auc > *auc) {
            best = Some((index, val_auc, model));
        }
    }
    let (best_index, _, best_model) = best.expect("budget >= 1");
    Ok(SearchOutcome {
        trials,
        best_index,
        best_model,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AamTrial {
    pub hyper: AamHyperparams,
    pub batch_size: usize,
}

/// Uniform over every discrete choice; dropout uniform on [0, 0.35].
pub fn sample_aam_trial<R: Rng + ?Sized>(rng: &mut R, use_demographics: bool) -> AamTrial {
    let pick = |rng: &mut R, n: usize| rng.random_range(0..n);
    let hidden_units = AamHyperparams::HIDDEN_UNITS[pick(rng, 4)];
    let layers = AamHyperparams::LAYERS[pick(rng, 3)];
    let dropout = rng.random_range(0.0..=AamHyperparams::MAX_DROPOUT);
    let l2 = AamHyperparams::L2_STRENGTHS[pick(rng, 3)];
    let batch_size = BATCH_SIZES[pick(rng, 3)];
    AamTrial {
        hyper: AamHyperparams {
            hidden_units,
            layers,
            dropout,
            l2,
            use_demographics,
        },
        batch_size,
    }
}

pub fn search_aam(
    data: &TrainingData,
    use_demographics: bool,
    budget: usize,
    master: u64,
) -> Result<SearchOutcome<AamTrial, TrainOutcome>> {
    let val_labels = labels(&data.validation);
    random_search(
        budget,
        master,
        |rng| sample_aam_trial(rng, use_demographics),
        |trial, trial_seed| {
            let outcome = train(data, trial.hyper, TrainConfig::new(trial.batch_size, trial_seed))?;
            let scores = score_fold(&outcome.model, &data.validation)?;
            Ok((auc_or_chance(&scores, &val_labels), outcome))
        },
    )
}
