use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{Interaction, PlatformCorpus, Timestamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFormat {
    /// RFC 3339, or `YYYY-MM-DD[ T]HH:MM:SS[.f]` read as UTC, or a bare date.
    Iso8601,
    /// Seconds since the Unix epoch, fractional part allowed.
    EpochSeconds,
    /// A chrono `strftime` pattern, read as UTC unless it carries an offset.
    Custom(String),
}

/// Maps the four logical response-log columns onto file headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogSchema {
    pub student_id: String,
    pub problem_id: String,
    pub skill_ids: String,
    pub start_time: String,
    pub delimiter: char,
    pub skill_delimiter: String,
    pub time_format: TimeFormat,
}

impl Default for LogSchema {
    fn default() -> Self {
        LogSchema {
            student_id: "student_id".into(),
            problem_id: "problem_id".into(),
            skill_ids: "skill_ids".into(),
            start_time: "start_time".into(),
            delimiter: ',',
            skill_delimiter: "|".into(),
            time_format: TimeFormat::Iso8601,
        }
    }
}

impl LogSchema {
    /// Public ASSISTments 2012-13 school-year export.
    pub fn assistments_2012() -> Self {
        LogSchema {
            student_id: "user_id".into(),
            problem_id: "problem_id".into(),
            skill_ids: "skill_id".into(),
            start_time: "start_time".into(),
            ..Default::default()
        }
    }

    /// KDD Cup 2010 Cognitive Tutor (Algebra I 2008-09) step-level export.
    /// Steps act as problems; `KC(SubSkills)` separates skills with `~~`.
    pub fn kdd_cognitive_tutor() -> Self {
        LogSchema {
            student_id: "Anon Student Id".into(),
            problem_id: "Step Name".into(),
            skill_ids: "KC(SubSkills)".into(),
            start_time: "First Transaction Time".into(),
            delimiter: '\t',
            skill_delimiter: "~~".into(),
            time_format: TimeFormat::Iso8601,
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .map_err(|_| Error::Config(format!("delimiter `{}` is not a single byte", self.delimiter)))
    }
}

pub(crate) fn parse_time(raw: &str, format: &TimeFormat) -> Option<Timestamp> {
    let raw = raw.trim();
    let micros = match format {
        TimeFormat::EpochSeconds => {
            let secs: f64 = raw.parse().ok()?;
            if !secs.is_finite() {
                return None;
            }
            (secs * 1e6).round() as i64
        }
        TimeFormat::Iso8601 => {
            if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
                dt.timestamp_micros()
            } else if let Some(dt) = ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
            {
                dt.and_utc().timestamp_micros()
            } else {
                let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok()?;
                d.and_hms_opt(0, 0, 0)?.and_utc().timestamp_micros()
            }
        }
        TimeFormat::Custom(f) => match DateTime::parse_from_str(raw, f) {
            Ok(dt) => dt.timestamp_micros(),
            Err(_) => NaiveDateTime::parse_from_str(raw, f).ok()?.and_utc().timestamp_micros(),
        },
    };
    Some(Timestamp(micros))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedLog {
    pub interactions: Vec<Interaction>,
    /// Data rows skipped because their skill cell was empty.
    pub dropped_without_skill: usize,
}

pub fn read_response_logs<R: Read>(reader: R, schema: &LogSchema) -> Result<LoadedLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let student_col = column(&schema.student_id)?;
    let problem_col = column(&schema.problem_id)?;
    let skill_col = column(&schema.skill_ids)?;
    let time_col = column(&schema.start_time)?;

    let mut out = LoadedLog::default();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let skill_ids: Vec<String> = field(skill_col)
            .split(schema.skill_delimiter.as_str())
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if skill_ids.is_empty() {
            out.dropped_without_skill += 1;
            continue;
        }
        let raw_time = field(time_col);
        let start_time = parse_time(raw_time, &schema.time_format).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp `{raw_time}`"),
        })?;
        out.interactions.push(Interaction {
            student_id: field(student_col).to_string(),
            problem_id: field(problem_col).to_string(),
            skill_ids,
            start_time,
            row,
        });
    }
    if out.dropped_without_skill > 0 {
        log::info!(
            "dropped {} response rows without a skill assignment",
            out.dropped_without_skill
        );
    }
    Ok(out)
}

pub fn load_response_logs(path: &Path, schema: &LogSchema) -> Result<LoadedLog> {
    read_response_logs(BufReader::new(File::open(path)?), schema)
}

fn format_time(t: Timestamp, format: &TimeFormat) -> Result<String> {
    let micros = t.0;
    let utc = || {
        DateTime::from_timestamp_micros(micros)
            .ok_or_else(|| Error::Data(format!("timestamp {micros} us is out of range")))
    };
    Ok(match format {
        TimeFormat::EpochSeconds if micros % 1_000_000 == 0 => (micros / 1_000_000).to_string(),
        TimeFormat::EpochSeconds => format!("{}", micros as f64 / 1e6),
        TimeFormat::Iso8601 => utc()?.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
        TimeFormat::Custom(f) => utc()?.format(f).to_string(),
    })
}

/// Writes interactions under `schema`, timestamps in its time format.
pub fn write_response_logs<W: Write>(corpus: &PlatformCorpus, writer: W, schema: &LogSchema) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .from_writer(writer);
    w.write_record([
        &schema.student_id,
        &schema.problem_id,
        &schema.skill_ids,
        &schema.start_time,
    ])?;
    for i in &corpus.interactions {
        let time = format_time(i.start_time, &schema.time_format)?;
        w.write_record([
            i.student_id.as_str(),
            i.problem_id.as_str(),
            &i.skill_ids.join(&schema.skill_delimiter),
            &time,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemTexts {
    pub texts: BTreeMap<String, String>,
    /// Optional `skill_ids` carried by the records.
    pub skills: BTreeMap<String, Vec<String>>,
    /// Records whose id had already been seen (last one wins).
    pub duplicates: usize,
}

#[derive(Deserialize)]
struct TextRecord {
    problem_id: serde_json::Value,
    text: String,
    #[serde(default)]
    skill_ids: Option<Vec<String>>,
}

#[derive(Serialize)]
struct TextRecordOut<'a> {
    problem_id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    skill_ids: Option<&'a [String]>,
}

/// Reads JSON-lines records `{"problem_id": ..., "text": ...}`; an optional
/// `skill_ids` array links the problem to skills without a response log.
pub fn read_problem_texts<R: BufRead>(reader: R) -> Result<ProblemTexts> {
    let mut out = ProblemTexts::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TextRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: format!("malformed problem-text record: {e}"),
        })?;
        let id = match rec.problem_id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("problem_id must be a string or number, found {other}"),
                })
            }
        };
        if out.texts.insert(id.clone(), rec.text).is_some() {
            out.duplicates += 1;
            out.skills.remove(&id);
        }
        if let Some(skills) = rec.skill_ids {
            out.skills.insert(id, skills);
        }
    }
    if out.duplicates > 0 {
        log::warn!(
            "{} duplicate problem ids in problem texts, last record kept",
            out.duplicates
        );
    }
    Ok(out)
}

pub fn load_problem_texts(path: &Path) -> Result<ProblemTexts> {
    read_problem_texts(BufReader::new(File::open(path)?))
}

pub fn write_problem_texts<W: Write>(corpus: &PlatformCorpus, mut writer: W) -> Result<()> {
    for p in corpus.problems.values() {
        let rec = TextRecordOut {
            problem_id: &p.problem_id,
            text: &p.raw_text,
            skill_ids: corpus.text_links.get(&p.problem_id).map(Vec::as_slice),
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writeln!(writer)?;
    }
    Ok(())
}
