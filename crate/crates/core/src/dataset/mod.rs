//! Cohort data model, CSV ingestion, fold assignment and feature building.

mod features;
mod io;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{
    build_features, fit_normalizer, truncate, FeatureSequence, Normalizer, FEATURE_DIM,
};
pub use io::{parse_cohort, parse_cohort_file, write_cohort, write_cohort_file, CSV_HEADER};
pub use split::{stratified_split, Folds, SplitRatios};

pub const MIN_TESTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestType {
    Mood,
    SymbolMatching,
    SymbolBaseline,
    Walking,
    UTurn,
    Balance,
    Mobility,
    Pinching,
    Drawing,
}

impl TestType {
    pub const ALL: [TestType; 9] = [
        TestType::Mood,
        TestType::SymbolMatching,
        TestType::SymbolBaseline,
        TestType::Walking,
        TestType::UTurn,
        TestType::Balance,
        TestType::Mobility,
        TestType::Pinching,
        TestType::Drawing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestType::Mood => "mood",
            TestType::SymbolMatching => "symbol_matching",
            TestType::SymbolBaseline => "symbol_baseline",
            TestType::Walking => "walking",
            TestType::UTurn => "uturn",
            TestType::Balance => "balance",
            TestType::Mobility => "mobility",
            TestType::Pinching => "pinching",
            TestType::Drawing => "drawing",
        }
    }

    pub fn metrics(self) -> impl Iterator<Item = Metric> {
        Metric::ALL.into_iter().filter(move |m| m.test_type() == self)
    }
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown test type `{s}`")))
    }
}

/// The fixed 16-entry metric vocabulary. The discriminant is the one-hot index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    MoodScore,
    SymbolResponseTime,
    SymbolCorrect,
    SymbolBaselineResponseTime,
    SymbolBaselineCorrect,
    WalkingSteps,
    UturnTurns,
    UturnTurnSpeed,
    BalanceSway,
    MobilityLifeSpace,
    PinchingCount,
    /// 0 = left, 1 = right.
    PinchingHand,
    DrawingHausdorffSquare,
    DrawingHausdorffCircle,
    DrawingHausdorffFigure8,
    DrawingHausdorffSpiral,
}

pub const METRIC_COUNT: usize = 16;

impl Metric {
    pub const ALL: [Metric; METRIC_COUNT] = [
        Metric::MoodScore,
        Metric::SymbolResponseTime,
        Metric::SymbolCorrect,
        Metric::SymbolBaselineResponseTime,
        Metric::SymbolBaselineCorrect,
        Metric::WalkingSteps,
        Metric::UturnTurns,
        Metric::UturnTurnSpeed,
        Metric::BalanceSway,
        Metric::MobilityLifeSpace,
        Metric::PinchingCount,
        Metric::PinchingHand,
        Metric::DrawingHausdorffSquare,
        Metric::DrawingHausdorffCircle,
        Metric::DrawingHausdorffFigure8,
        Metric::DrawingHausdorffSpiral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MoodScore => "mood_score",
            Metric::SymbolResponseTime => "symbol_response_time",
            Metric::SymbolCorrect => "symbol_correct",
            Metric::SymbolBaselineResponseTime => "symbol_baseline_response_time",
            Metric::SymbolBaselineCorrect => "symbol_baseline_correct",
            Metric::WalkingSteps => "walking_steps",
            Metric::UturnTurns => "uturn_turns",
            Metric::UturnTurnSpeed => "uturn_turn_speed",
            Metric::BalanceSway => "balance_sway",
            Metric::MobilityLifeSpace => "mobility_life_space",
            Metric::PinchingCount => "pinching_count",
            Metric::PinchingHand => "pinching_hand",
            Metric::DrawingHausdorffSquare => "drawing_hausdorff_square",
            Metric::DrawingHausdorffCircle => "drawing_hausdorff_circle",
            Metric::DrawingHausdorffFigure8 => "drawing_hausdorff_figure8",
            Metric::DrawingHausdorffSpiral => "drawing_hausdorff_spiral",
        }
    }

    pub fn test_type(self) -> TestType {
        use Metric::*;
        match self {
            MoodScore => TestType::Mood,
            SymbolResponseTime | SymbolCorrect => TestType::SymbolMatching,
            SymbolBaselineResponseTime | SymbolBaselineCorrect => TestType::SymbolBaseline,
            WalkingSteps => TestType::Walking,
            UturnTurns | UturnTurnSpeed => TestType::UTurn,
            BalanceSway => TestType::Balance,
            MobilityLifeSpace => TestType::Mobility,
            PinchingCount | PinchingHand => TestType::Pinching,
            DrawingHausdorffSquare
            | DrawingHausdorffCircle
            | DrawingHausdorffFigure8
            | DrawingHausdorffSpiral => TestType::Drawing,
        }
    }

    pub fn vocabulary() -> Vec<String> {
        Metric::ALL.iter().map(|m| m.as_str().to_string()).collect()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_type: TestType,
    pub metric: Metric,
    pub value: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub age: u32,
    /// 1 = female, 0 = male.
    pub sex: u8,
    pub has_ms: bool,
    /// Sorted by timestamp, non-decreasing.
    pub results: Vec<TestResult>,
}

impl Participant {
    pub fn label(&self) -> f64 {
        if self.has_ms {
            1.0
        } else {
            0.0
        }
    }

    /// Days between the first and the last recorded test.
    pub fn usage_days(&self) -> f64 {
        match (self.results.first(), self.results.last()) {
            (Some(a), Some(b)) => (b.timestamp - a.timestamp) as f64 / 86_400.0,
            _ => 0.0,
        }
    }

    /// A copy without any records of `test_type`.
    pub fn without_test_type(&self, test_type: TestType) -> Participant {
        Participant {
            results: self
                .results
                .iter()
                .filter(|r| r.test_type != test_type)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub participants: Vec<Participant>,
}

impl Cohort {
    pub fn new(participants: Vec<Participant>) -> Self {
        Self { participants }
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Participant> {
        self.participants.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn prevalence(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.participants.iter().filter(|p| p.has_ms).count() as f64 / self.len() as f64
    }

    pub fn without_test_type(&self, test_type: TestType) -> Cohort {
        Cohort::new(
            self.participants
                .iter()
                .map(|p| p.without_test_type(test_type))
                .collect(),
        )
    }
}

impl<'a> IntoIterator for &'a Cohort {
    type Item = &'a Participant;
    type IntoIter = std::slice::Iter<'a, Participant>;

    fn into_iter(self) -> Self::IntoIter {
        self.participants.iter()
    }
}

/// Keeps exactly the participants with at least `min_count` results.
pub fn filter_min_tests(cohort: &Cohort, min_count: usize) -> Cohort {
    Cohort::new(
        cohort
            .participants
            .iter()
            .filter(|p| p.results.len() >= min_count)
            .cloned()
            .collect(),
    )
}
