//! JSON-lines sentence-pair datasets.
//!
//! One object per line:
//!
//! ```json
//! {"id": "dev.en-en.3", "lang1": "en", "lang2": "en",
//!  "sentence1": "...", "sentence2": "...",
//!  "start1": 10, "end1": 15, "start2": 0, "end2": 5, "label": "T"}
//! ```
//!
//! Offsets count Unicode scalar values; `end` is exclusive. `label` is `"T"`,
//! `"F"` or absent.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Same sense.
    T,
    /// Different sense.
    F,
}

impl Label {
    pub fn as_class(self) -> u8 {
        match self {
            Label::T => 1,
            Label::F => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::T => "T",
            Label::F => "F",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub lang1: String,
    pub lang2: String,
    pub sentence1: String,
    pub sentence2: String,
    pub start1: usize,
    pub end1: usize,
    pub start2: usize,
    pub end2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl PairRecord {
    pub fn sentence_id(&self, which: usize) -> String {
        format!("{}.s{which}", self.id)
    }

    pub fn sentence(&self, which: usize) -> &str {
        if which == 1 {
            &self.sentence1
        } else {
            &self.sentence2
        }
    }

    pub fn span(&self, which: usize) -> (usize, usize) {
        if which == 1 {
            (self.start1, self.end1)
        } else {
            (self.start2, self.end2)
        }
    }

    /// Checks both spans against their sentences.
    pub fn validate(&self) -> Result<(), HarnessError> {
        for which in [1, 2] {
            let (start, end) = self.span(which);
            let len = self.sentence(which).chars().count();
            if start >= end || end > len {
                return Err(HarnessError::SpanOutOfBounds {
                    id: self.id.clone(),
                    sentence: which,
                    start,
                    end,
                    len,
                });
            }
        }
        Ok(())
    }

    /// Target word text of sentence `which`.
    pub fn target_text(&self, which: usize) -> String {
        let (start, end) = self.span(which);
        self.sentence(which).chars().skip(start).take(end - start).collect()
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &'static str, line: usize) -> Result<&'a Value, HarnessError> {
    obj.get(name).ok_or(HarnessError::MissingField { line, field: name })
}

fn str_field(obj: &Map<String, Value>, name: &'static str, line: usize) -> Result<String, HarnessError> {
    field(obj, name, line)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| HarnessError::Json {
            line,
            message: format!("field {name} must be a string"),
        })
}

fn offset_field(obj: &Map<String, Value>, name: &'static str, line: usize) -> Result<usize, HarnessError> {
    field(obj, name, line)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| HarnessError::Json {
            line,
            message: format!("field {name} must be a non-negative integer"),
        })
}

/// Parses and validates one JSON-lines document.
pub fn parse_dataset(text: &str) -> Result<Vec<PairRecord>, HarnessError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| HarnessError::Json {
            line,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| HarnessError::Json {
            line,
            message: "expected a JSON object".into(),
        })?;
        let label = match obj.get("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) if s == "T" => Some(Label::T),
            Some(Value::String(s)) if s == "F" => Some(Label::F),
            Some(other) => {
                return Err(HarnessError::BadLabel {
                    line,
                    value: other.to_string(),
                })
            }
        };
        let record = PairRecord {
            id: str_field(obj, "id", line)?,
            lang1: str_field(obj, "lang1", line)?,
            lang2: str_field(obj, "lang2", line)?,
            sentence1: str_field(obj, "sentence1", line)?,
            sentence2: str_field(obj, "sentence2", line)?,
            start1: offset_field(obj, "start1", line)?,
            end1: offset_field(obj, "end1", line)?,
            start2: offset_field(obj, "start2", line)?,
            end2: offset_field(obj, "end2", line)?,
            label,
        };
        record.validate()?;
        if !seen.insert(record.id.clone()) {
            return Err(HarnessError::DuplicateId { id: record.id });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<PairRecord>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let records = parse_dataset(&text)?;
    log::info!("{}: {} sentence pairs", path.display(), records.len());
    Ok(records)
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[PairRecord]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.write_all(b"\n").expect("write to Vec");
    }
    std::fs::write(path, buf).map_err(|e| HarnessError::io(path, e))
}

/// Class labels, failing on the first unlabeled record.
pub fn labels(records: &[PairRecord]) -> Result<Vec<u8>, HarnessError> {
    records
        .iter()
        .map(|r| {
            r.label
                .map(Label::as_class)
                .ok_or_else(|| HarnessError::MissingLabel { id: r.id.clone() })
        })
        .collect()
}
