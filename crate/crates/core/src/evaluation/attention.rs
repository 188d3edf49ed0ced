use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aam::{Aam, Demographics};
use crate::dataset::{build_features, truncate, Normalizer, Participant, TestType};
use crate::error::{Error, Result};
use crate::pipeline::{Checkpoint, FittedModel};

pub const TOP_INSTANCES: usize = 5;

/// Attention summed over the metric records of one test instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    /// Whole days since the participant's first test.
    pub day: i64,
    pub test_type: String,
    pub total_attention: f64,
    pub top5: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTimeline {
    pub participant: String,
    pub score: f64,
    pub threshold: f64,
    pub predicted_positive: bool,
    /// Records fed to the model after truncation.
    pub records_used: usize,
    pub entries: Vec<AttentionEntry>,
}

impl AttentionTimeline {
    /// One JSON object per test instance.
    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut sink, e)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "participant": self.participant,
            "score": self.score,
            "threshold": self.threshold,
            "predicted_positive": self.predicted_positive,
            "records_used": self.records_used,
            "instances": self.entries.len(),
        })
    }
}

/// Groups record-level attention into test instances, keyed by test type
/// and timestamp, in order of first appearance.
pub fn attention_timeline(
    model: &Aam,
    normalizer: &Normalizer,
    k_max: usize,
    threshold: f64,
    participant: &Participant,
) -> Result<AttentionTimeline> {
    let features = truncate(&build_features(participant, normalizer), k_max.max(1));
    if features.is_empty() {
        return Err(Error::Empty("participant test history"));
    }
    let demo = model.hyper.use_demographics.then(|| Demographics::of(participant));
    let prediction = model.predict(&features, demo)?;

    let records = &participant.results[..features.len()];
    let first = records[0].timestamp;
    let mut index: HashMap<(TestType, i64), usize> = HashMap::new();
    let mut entries: Vec<AttentionEntry> = Vec::new();
    for (r, a) in records.iter().zip(&prediction.attention) {
        let slot = *index.entry((r.test_type, r.timestamp)).or_insert_with(|| {
            entries.push(AttentionEntry {
                day: (r.timestamp - first).div_euclid(86_400),
                test_type: r.test_type.as_str().to_string(),
                total_attention: 0.0,
                top5: false,
            });
            entries.len() - 1
        });
        entries[slot].total_attention += a;
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[b].total_attention.total_cmp(&entries[a].total_attention));
    for &i in order.iter().take(TOP_INSTANCES) {
        entries[i].top5 = true;
    }

    Ok(AttentionTimeline {
        participant: participant.id.clone(),
        score: prediction.score,
        threshold,
        predicted_positive: prediction.score >= threshold,
        records_used: features.len(),
        entries,
    })
}

pub fn export_attention(checkpoint: &Checkpoint, participant: &Participant) -> Result<AttentionTimeline> {
    match &checkpoint.model {
        FittedModel::Aam(model) => attention_timeline(
            model,
            &checkpoint.normalizer,
            checkpoint.k_max,
            checkpoint.threshold,
            participant,
        ),
        _ => Err(Error::invalid(format!(
            "attention export needs an attention model, checkpoint holds `{}`",
            checkpoint.kind
        ))),
    }
}
