use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{evaluate_scores, Estimate, Evaluation, TableRow};
use crate::aam::AamHyperparams;
use crate::baselines::{
    choose_orientation, fit_random_forest, mean_agg_score, LogisticHead, RfConfig, RfSample,
};
use crate::dataset::{Cohort, Folds, TestType};
use crate::error::{Error, Result};
use crate::pipeline::{FittedModel, ModelKind};
use crate::seed::{self, Stream};
use crate::training::{
    labels, prepare, select_threshold, train, Prepared, TrainConfig, TrainingData,
};

pub const SWEEP_K: [usize; 10] = [25, 30, 40, 50, 100, 150, 200, 250, 300, 350];

/// Fixed settings under which every model of an experiment is refit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedSetup {
    /// Used by both attention models; the demographics flag is set per kind.
    pub hyper: AamHyperparams,
    pub train: TrainConfig,
    pub forest: RfConfig,
    pub n_boot: usize,
    pub seed: u64,
}

/// Fits one model kind without hyperparameter search.
pub fn fit_fixed(kind: ModelKind, data: &TrainingData, setup: &FixedSetup) -> Result<FittedModel> {
    let y = labels(&data.train);
    Ok(match kind {
        ModelKind::Aam | ModelKind::AamDemo => {
            let hyper = AamHyperparams {
                use_demographics: kind == ModelKind::AamDemo,
                ..setup.hyper
            };
            FittedModel::Aam(train(data, hyper, setup.train)?.model)
        }
        ModelKind::MeanAgg => {
            let s: Vec<f64> = data.validation.iter().map(|p| mean_agg_score(&p.features)).collect();
            FittedModel::MeanAgg(choose_orientation(&s, &labels(&data.validation)))
        }
        ModelKind::MeanAggDemo => {
            let x: Vec<[f64; 3]> = data
                .train
                .iter()
                .map(|p| [mean_agg_score(&p.features), p.demographics.age_norm, p.demographics.sex])
                .collect();
            FittedModel::MeanAggDemo(LogisticHead::fit(&x, &y)?.head)
        }
        ModelKind::RfDemo => {
            let samples: Vec<RfSample> = data.train.iter().map(RfSample::from).collect();
            FittedModel::Forest(fit_random_forest(&samples, setup.forest)?)
        }
    })
}

/// Threshold from validation, metrics with intervals on the test fold.
fn evaluate_on_test(
    name: &str,
    model: &FittedModel,
    data: &TrainingData,
    test: &[Prepared],
    setup: &FixedSetup,
) -> Result<Evaluation> {
    let val_scores = model.score_all(&data.validation)?;
    let threshold = select_threshold(&val_scores, &labels(&data.validation));
    let scores = model.score_all(test)?;
    evaluate_scores(
        name,
        &scores,
        &labels(test),
        threshold,
        setup.n_boot,
        seed::derive(setup.seed, Stream::Bootstrap, 0),
    )
}

/// AUPR per truncation length and model, each model refit per length.
pub fn sweep_max_tests(
    folds: &Folds,
    models: &[ModelKind],
    k_list: &[usize],
    setup: &FixedSetup,
) -> Result<Vec<TableRow>> {
    if k_list.is_empty() || models.is_empty() {
        return Err(Error::invalid("sweep needs at least one k and one model"));
    }
    let jobs: Vec<(usize, ModelKind)> = k_list
        .iter()
        .flat_map(|&k| models.iter().map(move |&m| (k, m)))
        .collect();
    jobs.par_iter()
        .map(|&(k, kind)| {
            let data = TrainingData::new(&folds.train, &folds.validation, k)?;
            let model = fit_fixed(kind, &data, setup)?;
            let test = prepare(&folds.test, &data.normalizer, k)?;
            let ev = evaluate_on_test(kind.as_str(), &model, &data, &test, setup)?;
            log::info!("sweep k={k} {kind}: AUPR {:.4}", ev.report.aupr.point);
            Ok(TableRow::new(kind.as_str(), k, "aupr", ev.report.aupr))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` is the all-tests reference.
    pub removed: Option<String>,
    pub f1: Estimate,
    /// Reference F1 minus this row's F1.
    pub f1_drop: f64,
    pub threshold: f64,
    /// Participants left without any record after the removal.
    pub emptied: usize,
}

impl AblationRow {
    pub fn model_name(&self, base: ModelKind) -> String {
        match &self.removed {
            None => format!("{base}_all_tests"),
            Some(t) => format!("{base}_without_{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub model: ModelKind,
    pub k_max: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn table(&self) -> Vec<TableRow> {
        self.rows
            .iter()
            .map(|r| TableRow::new(r.model_name(self.model), self.k_max, "f1", r.f1))
            .collect()
    }

    /// Test type whose removal lowers F1 the most.
    pub fn largest_drop(&self) -> Option<&AblationRow> {
        self.rows
            .iter()
            .filter(|r| r.removed.is_some())
            .max_by(|a, b| a.f1_drop.total_cmp(&b.f1_drop))
    }
}

fn emptied(cohort: &Cohort) -> usize {
    cohort.iter().filter(|p| p.results.is_empty()).count()
}

/// Retrains with each test type removed end to end, normalizer included,
/// under the reference model's hyperparameters.
pub fn ablate_test_types(folds: &Folds, kind: ModelKind, k_max: usize, setup: &FixedSetup) -> Result<AblationReport> {
    let removals: Vec<Option<TestType>> = std::iter::once(None).chain(TestType::ALL.map(Some)).collect();
    let results: Vec<Result<(Option<TestType>, Evaluation, usize)>> = removals
        .par_iter()
        .map(|&removed| {
            let strip = |c: &Cohort| match removed {
                Some(t) => c.without_test_type(t),
                None => c.clone(),
            };
            let (train_c, val_c, test_c) = (strip(&folds.train), strip(&folds.validation), strip(&folds.test));
            let data = TrainingData::new(&train_c, &val_c, k_max)?;
            let model = fit_fixed(kind, &data, setup)?;
            let test = prepare(&test_c, &data.normalizer, k_max)?;
            let name = removed.map_or("all_tests", |t| t.as_str());
            let ev = evaluate_on_test(name, &model, &data, &test, setup)?;
            let n_empty = emptied(&train_c) + emptied(&val_c) + emptied(&test_c);
            if n_empty > 0 {
                log::warn!("removing {name} left {n_empty} participants without tests; they score 0.5");
            }
            log::info!("ablation {name}: F1 {:.4}", ev.report.f1.point);
            Ok((removed, ev, n_empty))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut reference = f64::NAN;
    for r in results {
        let (removed, ev, n_empty) = r?;
        if removed.is_none() {
            reference = ev.report.f1.point;
        }
        rows.push(AblationRow {
            removed: removed.map(|t| t.as_str().to_string()),
            f1: ev.report.f1,
            f1_drop: reference - ev.report.f1.point,
            threshold: ev.report.threshold,
            emptied: n_empty,
        });
    }
    Ok(AblationReport {
        model: kind,
        k_max,
        rows,
    })
}
