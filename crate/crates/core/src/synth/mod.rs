//! Synthetic cohorts in the ingestion schema with a planted diagnostic
//! signal, plus the per-fold summary table.

mod config;
mod describe;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;

pub use config::{MetricProfile, SynthConfig};
pub use describe::{describe_cohort, render_table, FoldSummary, QuantileSummary, TABLE_PROPERTIES};

use crate::dataset::{Cohort, Metric, Participant, TestResult, TestType, METRIC_COUNT};
use crate::error::Result;
use crate::seed::{self, Stream};

/// 2018-04-23T00:00:00Z.
pub const STUDY_START: i64 = 1_524_441_600;
const DAY: i64 = 86_400;
const ENROLMENT_WINDOW_DAYS: i64 = 365;
const MIN_AGE: f64 = 18.0;
const MAX_AGE: f64 = 90.0;
/// Seconds between consecutive test instances within a session.
const INSTANCE_SPACING: i64 = 90;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Domain {
    /// Non-negative real, rounded to 4 decimals.
    Measure,
    /// Non-negative integer.
    Count,
    /// Integer 1..=5.
    Likert,
    /// Bernoulli with `mean` as the probability of 1 (right hand).
    Hand,
}

fn domain(metric: Metric) -> Domain {
    use Metric::*;
    match metric {
        MoodScore => Domain::Likert,
        SymbolCorrect | SymbolBaselineCorrect | WalkingSteps | UturnTurns | PinchingCount => Domain::Count,
        PinchingHand => Domain::Hand,
        _ => Domain::Measure,
    }
}

/// One record: `mean + sd · (offset + noise_scale · ε)`, mapped into the
/// metric's domain.
fn draw_value(
    profile: &MetricProfile,
    metric: Metric,
    offset: f64,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if domain(metric) == Domain::Hand {
        return if rng.random_bool(profile.mean.clamp(0.0, 1.0)) { 1.0 } else { 0.0 };
    }
    let noise: f64 = rng.sample(StandardNormal);
    let x = profile.mean + profile.sd * (offset + noise_scale * noise);
    match domain(metric) {
        Domain::Measure => (x.max(0.0) * 1e4).round() / 1e4,
        Domain::Count => x.round().max(0.0),
        Domain::Likert => x.round().clamp(1.0, 5.0),
        Domain::Hand => unreachable!(),
    }
}

struct Demography {
    has_ms: bool,
    female: bool,
}

/// Exact label and sex counts, shuffled over participant slots.
fn demography(cfg: &SynthConfig) -> Vec<Demography> {
    let n = cfg.n_participants;
    let n_ms = (cfg.ms_prevalence * n as f64).round() as usize;
    let p_f_ms = (cfg.female_fraction + cfg.female_enrichment * (1.0 - cfg.ms_prevalence)).clamp(0.0, 1.0);
    let p_f_hc = (cfg.female_fraction - cfg.female_enrichment * cfg.ms_prevalence).clamp(0.0, 1.0);
    let f_ms = (p_f_ms * n_ms as f64).round() as usize;
    let f_hc = (p_f_hc * (n - n_ms) as f64).round() as usize;
    let mut slots: Vec<Demography> = (0..n)
        .map(|i| {
            let has_ms = i < n_ms;
            let female = if has_ms { i < f_ms } else { i - n_ms < f_hc };
            Demography { has_ms, female }
        })
        .collect();
    slots.shuffle(&mut seed::derived_rng(cfg.seed, Stream::Synth, 0));
    slots
}

fn participant(cfg: &SynthConfig, index: usize, demo: &Demography) -> Participant {
    let mut rng = seed::derived_rng(cfg.seed, Stream::Synth, index as u64 + 1);
    let ms = demo.has_ms as u8 as f64;

    let log_age = cfg.age_median.ln() + cfg.age_ms_shift * (ms - cfg.ms_prevalence);
    let age = LogNormal::new(log_age, cfg.age_sigma)
        .map(|d| d.sample(&mut rng))
        .unwrap_or(cfg.age_median);
    let age = age.clamp(MIN_AGE, MAX_AGE).round() as u32;

    let usage = LogNormal::new(cfg.usage_median_days.ln(), cfg.usage_sigma)
        .map(|d| d.sample(&mut rng))
        .unwrap_or(cfg.usage_median_days);
    let usage_days = (usage.round() as i64).clamp(1, cfg.usage_max_days.max(1) as i64);

    // stable per-participant offsets, one per metric
    let rho = cfg.subject_correlation;
    let offsets: [f64; METRIC_COUNT] = std::array::from_fn(|m| {
        let z: f64 = rng.sample(StandardNormal);
        cfg.metrics[m].effect * ms + rho.sqrt() * z
    });
    let noise_scale = (1.0 - rho).sqrt();

    let first_day = STUDY_START + rng.random_range(0..ENROLMENT_WINDOW_DAYS) * DAY;
    let adherence = if demo.has_ms {
        (cfg.adherence * cfg.ms_adherence_multiplier).min(1.0)
    } else {
        cfg.adherence
    };

    let mut results = Vec::new();
    for day in 0..=usage_days {
        let full_suite = day == 0;
        let active = full_suite || day == usage_days || rng.random_bool(adherence);
        if !active {
            continue;
        }
        // sessions start between 07:00 and 21:00
        let mut ts = first_day + day * DAY + rng.random_range(7 * 3600..21 * 3600);
        for test_type in TestType::ALL {
            if !full_suite && !rng.random_bool(cfg.test_probability) {
                continue;
            }
            for metric in test_type.metrics() {
                let m = metric.index();
                let value = draw_value(&cfg.metrics[m], metric, offsets[m], noise_scale, &mut rng);
                results.push(TestResult {
                    test_type,
                    metric,
                    value,
                    timestamp: ts,
                });
            }
            ts += INSTANCE_SPACING;
        }
    }

    Participant {
        id: format!("P{:05}", index + 1),
        age,
        sex: demo.female as u8,
        has_ms: demo.has_ms,
        results,
    }
}

/// Deterministic in the config: the same config yields an identical cohort.
pub fn generate_cohort(cfg: &SynthConfig) -> Result<Cohort> {
    cfg.validate()?;
    let demography = demography(cfg);
    let participants = demography
        .par_iter()
        .enumerate()
        .map(|(i, d)| participant(cfg, i, d))
        .collect();
    Ok(Cohort::new(participants))
}
