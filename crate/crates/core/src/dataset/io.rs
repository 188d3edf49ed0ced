use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use super::{Cohort, Metric, Participant, TestResult, TestType};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "participant_id",
    "age",
    "sex",
    "has_ms",
    "test_type",
    "metric",
    "value",
    "timestamp_s",
];

struct Pending {
    participant: Participant,
    /// Missing demographics exclude the participant.
    incomplete: bool,
    seen: HashSet<(i64, Metric)>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a cohort CSV. Participants appear in order of first occurrence;
/// each participant's results are stably sorted by timestamp.
pub fn parse_cohort<R: Read>(source: R) -> Result<Cohort> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(source);

    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut order: Vec<Pending> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            ));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(parse_err(line, "empty participant_id"));
        }

        let age = match &record[1] {
            "" => None,
            s => Some(
                s.parse::<u32>()
                    .map_err(|_| parse_err(line, format!("invalid age `{s}`")))?,
            ),
        };
        let sex = match &record[2] {
            "" => None,
            "F" => Some(1u8),
            "M" => Some(0u8),
            s => return Err(parse_err(line, format!("invalid sex `{s}`, expected F or M"))),
        };
        let has_ms = match &record[3] {
            "0" => false,
            "1" => true,
            s => return Err(parse_err(line, format!("invalid has_ms `{s}`"))),
        };
        let test_type: TestType = record[4]
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        let metric: Metric = record[5]
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        if metric.test_type() != test_type {
            return Err(parse_err(
                line,
                format!("metric `{metric}` does not belong to test type `{test_type}`"),
            ));
        }
        let value: f64 = record[6]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid value `{}`", &record[6])))?;
        if !value.is_finite() {
            return Err(parse_err(line, "value is not finite"));
        }
        let timestamp: i64 = record[7]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid timestamp `{}`", &record[7])))?;
        if timestamp <= 0 {
            return Err(parse_err(line, "timestamp must be positive"));
        }

        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            order.push(Pending {
                participant: Participant {
                    id: id.to_string(),
                    age: age.unwrap_or(0),
                    sex: sex.unwrap_or(0),
                    has_ms,
                    results: Vec::new(),
                },
                incomplete: age.is_none() || sex.is_none(),
                seen: HashSet::new(),
            });
            order.len() - 1
        });
        let pending = &mut order[slot];
        if age.is_none() || sex.is_none() {
            pending.incomplete = true;
        }
        let p = &pending.participant;
        if age.is_some_and(|a| a != p.age)
            || sex.is_some_and(|s| s != p.sex)
            || has_ms != p.has_ms
        {
            warn!("line {line}: demographics for `{id}` differ from its first row; keeping the first");
        }
        if !pending.seen.insert((timestamp, metric)) {
            warn!("line {line}: duplicate ({id}, {timestamp}, {metric}); keeping the first");
            continue;
        }
        pending.participant.results.push(TestResult {
            test_type,
            metric,
            value,
            timestamp,
        });
    }

    let mut participants = Vec::with_capacity(order.len());
    for mut pending in order {
        if pending.incomplete {
            warn!(
                "participant `{}` has missing age or sex; excluded",
                pending.participant.id
            );
            continue;
        }
        pending.participant.results.sort_by_key(|r| r.timestamp);
        participants.push(pending.participant);
    }
    Ok(Cohort::new(participants))
}

pub fn parse_cohort_file(path: impl AsRef<Path>) -> Result<Cohort> {
    parse_cohort(BufReader::new(File::open(path)?))
}

/// Writes the cohort in the ingestion schema. `parse_cohort` inverts this
/// exactly for cohorts whose results are already sorted.
pub fn write_cohort<W: Write>(cohort: &Cohort, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for p in cohort {
        let age = p.age.to_string();
        let sex = if p.sex == 1 { "F" } else { "M" };
        let has_ms = if p.has_ms { "1" } else { "0" };
        for r in &p.results {
            writer.write_record([
                p.id.as_str(),
                age.as_str(),
                sex,
                has_ms,
                r.test_type.as_str(),
                r.metric.as_str(),
                &r.value.to_string(),
                &r.timestamp.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_cohort_file(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    write_cohort(cohort, BufWriter::new(File::create(path)?))
}
