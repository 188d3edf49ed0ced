use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{Metric, METRIC_COUNT};
use crate::error::{Error, Result};

/// Healthy-group location and spread of one metric, plus the diagnosis shift
/// in units of that spread.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricProfile {
    pub mean: f64,
    pub sd: f64,
    pub effect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub ms_prevalence: f64,
    pub female_fraction: f64,
    /// Extra probability of being female given MS; the healthy group is
    /// lowered so `female_fraction` stays the marginal.
    pub female_enrichment: f64,
    pub age_median: f64,
    /// Log-scale spread of age.
    pub age_sigma: f64,
    /// Log-scale age offset applied to `has_ms − prevalence`.
    pub age_ms_shift: f64,
    pub usage_median_days: f64,
    pub usage_sigma: f64,
    pub usage_max_days: u32,
    /// Probability that a day between the first and last session has tests.
    pub adherence: f64,
    pub ms_adherence_multiplier: f64,
    /// Probability that a test type is performed in a non-initial session.
    pub test_probability: f64,
    /// Share of within-group variance that is a stable per-participant offset.
    pub subject_correlation: f64,
    pub metrics: [MetricProfile; METRIC_COUNT],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        use Metric::*;
        let profile = |metric: Metric| -> MetricProfile {
            let (mean, sd, effect) = match metric {
                MoodScore => (3.6, 0.9, -0.8),
                SymbolResponseTime => (2.0, 0.5, 0.2),
                SymbolCorrect => (30.0, 6.0, 0.0),
                SymbolBaselineResponseTime => (1.2, 0.3, 0.0),
                SymbolBaselineCorrect => (40.0, 6.0, 0.0),
                WalkingSteps => (400.0, 80.0, -0.2),
                UturnTurns => (12.0, 3.0, 0.0),
                UturnTurnSpeed => (1.5, 0.4, 0.0),
                BalanceSway => (0.5, 0.15, 0.0),
                MobilityLifeSpace => (10.0, 4.0, 0.0),
                PinchingCount => (30.0, 7.0, 0.0),
                PinchingHand => (0.8, 0.0, 0.0),
                DrawingHausdorffSquare
                | DrawingHausdorffCircle
                | DrawingHausdorffFigure8
                | DrawingHausdorffSpiral => (20.0, 6.0, 0.8),
            };
            MetricProfile { mean, sd, effect }
        };
        Self {
            n_participants: 774,
            ms_prevalence: 0.52,
            female_fraction: 0.60,
            female_enrichment: 0.21,
            age_median: 41.0,
            age_sigma: 0.30,
            age_ms_shift: 0.08,
            usage_median_days: 21.0,
            // places the 90th percentile near 190 days
            usage_sigma: (190.0f64 / 21.0).ln() / 1.281_551_565_545,
            usage_max_days: 480,
            adherence: 0.2,
            ms_adherence_multiplier: 1.4,
            test_probability: 0.6,
            subject_correlation: 0.4,
            metrics: Metric::ALL.map(profile),
            seed: 7,
        }
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        fraction("ms_prevalence", self.ms_prevalence)?;
        fraction("female_fraction", self.female_fraction)?;
        fraction("adherence", self.adherence)?;
        fraction("test_probability", self.test_probability)?;
        fraction("subject_correlation", self.subject_correlation)?;
        if !(0.0..=1.0).contains(&self.female_enrichment.abs()) {
            return Err(Error::invalid("female_enrichment must lie in [-1, 1]"));
        }
        for (name, v) in [
            ("age_median", self.age_median),
            ("usage_median_days", self.usage_median_days),
            ("ms_adherence_multiplier", self.ms_adherence_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("age_sigma", self.age_sigma),
            ("usage_sigma", self.usage_sigma),
            ("age_ms_shift", self.age_ms_shift.abs()),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for (m, p) in Metric::ALL.iter().zip(&self.metrics) {
            if !(p.mean.is_finite() && p.sd.is_finite() && p.sd >= 0.0 && p.effect.is_finite()) {
                return Err(Error::invalid(format!("profile of `{m}` must be finite with sd >= 0")));
            }
        }
        Ok(())
    }

    /// Every effect zeroed and no sex or age association with diagnosis.
    pub fn null(mut self) -> Self {
        for p in &mut self.metrics {
            p.effect = 0.0;
        }
        self.female_enrichment = 0.0;
        self.age_ms_shift = 0.0;
        self
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not given keep
    /// their default. Per-metric keys are `effect.<metric>`, `mean.<metric>`
    /// and `sd.<metric>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                line: lineno as u64 + 1,
                message: msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let real = || value.parse::<f64>().map_err(|_| bad(format!("`{key}`: not a number: `{value}`")));
            let count = || value.parse::<u64>().map_err(|_| bad(format!("`{key}`: not a count: `{value}`")));
            match key {
                "n_participants" => cfg.n_participants = count()? as usize,
                "ms_prevalence" => cfg.ms_prevalence = real()?,
                "female_fraction" => cfg.female_fraction = real()?,
                "female_enrichment" => cfg.female_enrichment = real()?,
                "age_median" => cfg.age_median = real()?,
                "age_sigma" => cfg.age_sigma = real()?,
                "age_ms_shift" => cfg.age_ms_shift = real()?,
                "usage_median_days" => cfg.usage_median_days = real()?,
                "usage_sigma" => cfg.usage_sigma = real()?,
                "usage_max_days" => cfg.usage_max_days = count()? as u32,
                "adherence" => cfg.adherence = real()?,
                "ms_adherence_multiplier" => cfg.ms_adherence_multiplier = real()?,
                "test_probability" => cfg.test_probability = real()?,
                "subject_correlation" => cfg.subject_correlation = real()?,
                "seed" => cfg.seed = count()?,
                _ => {
                    let (field, metric) = key
                        .split_once('.')
                        .ok_or_else(|| bad(format!("unknown key `{key}`")))?;
                    let metric: Metric = metric.parse().map_err(|_| bad(format!("unknown metric in `{key}`")))?;
                    let slot = &mut cfg.metrics[metric.index()];
                    match field {
                        "effect" => slot.effect = real()?,
                        "mean" => slot.mean = real()?,
                        "sd" => slot.sd = real()?,
                        _ => return Err(bad(format!("unknown key `{key}`"))),
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Inverse of [`SynthConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_participants = {}", self.n_participants);
        for (k, v) in [
            ("ms_prevalence", self.ms_prevalence),
            ("female_fraction", self.female_fraction),
            ("female_enrichment", self.female_enrichment),
            ("age_median", self.age_median),
            ("age_sigma", self.age_sigma),
            ("age_ms_shift", self.age_ms_shift),
            ("usage_median_days", self.usage_median_days),
            ("usage_sigma", self.usage_sigma),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "usage_max_days = {}", self.usage_max_days);
        for (k, v) in [
            ("adherence", self.adherence),
            ("ms_adherence_multiplier", self.ms_adherence_multiplier),
            ("test_probability", self.test_probability),
            ("subject_correlation", self.subject_correlation),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        for (m, p) in Metric::ALL.iter().zip(&self.metrics) {
            let _ = writeln!(s, "mean.{m} = {}", p.mean);
            let _ = writeln!(s, "sd.{m} = {}", p.sd);
            let _ = writeln!(s, "effect.{m} = {}", p.effect);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = SynthConfig::default();
        assert_eq!(SynthConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = SynthConfig::parse("# comment\nseed = 3\n effect.mood_score = -1.5 \n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.metrics[Metric::MoodScore.index()].effect, -1.5);
        assert!(matches!(
            SynthConfig::parse("seed = 1\nbogus = 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(SynthConfig::parse("ms_prevalence = 1.5").is_err());
        assert!(SynthConfig::parse("effect.nope = 1").is_err());
    }
}
