//! Strict parsing of raw model output.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Task;
use crate::corpus::Vad;
use crate::dist::SampleSelection;
use crate::labels::LabelSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NotJson,
    UnknownLabel,
    Empty,
    OutOfRange,
    MissingKey,
    /// No response was obtained; the backend kept failing.
    BackendError,
}

impl FailureReason {
    pub const ALL: [FailureReason; 6] = [
        FailureReason::NotJson,
        FailureReason::UnknownLabel,
        FailureReason::Empty,
        FailureReason::OutOfRange,
        FailureReason::MissingKey,
        FailureReason::BackendError,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FailureReason::NotJson => "not_json",
            FailureReason::UnknownLabel => "unknown_label",
            FailureReason::Empty => "empty",
            FailureReason::OutOfRange => "out_of_range",
            FailureReason::MissingKey => "missing_key",
            FailureReason::BackendError => "backend_error",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedResponse {
    Labels(SampleSelection),
    Vad(Vad),
    Failure(FailureReason),
}

impl ParsedResponse {
    pub fn is_success(&self) -> bool {
        !matches!(self, ParsedResponse::Failure(_))
    }

    pub fn failure(&self) -> Option<FailureReason> {
        match self {
            ParsedResponse::Failure(r) => Some(*r),
            _ => None,
        }
    }
}

/// Categorical: a JSON array of label strings, deduplicated, non-empty,
/// every entry in `space`. VAD: a JSON object with numeric `V`, `A`, `D`
/// in `[1, 5]`. Anything else is a failure, never a panic.
pub fn parse_response(raw: &str, task: Task, space: &LabelSpace) -> ParsedResponse {
    let value: Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => return ParsedResponse::Failure(FailureReason::NotJson),
    };
    match task {
        Task::Categorical => parse_labels(&value, space),
        Task::Vad => parse_vad(&value),
    }
}

/// Lossy UTF-8 decoding in front of [`parse_response`].
pub fn parse_bytes(raw: &[u8], task: Task, space: &LabelSpace) -> ParsedResponse {
    parse_response(&String::from_utf8_lossy(raw), task, space)
}

fn parse_labels(value: &Value, space: &LabelSpace) -> ParsedResponse {
    let Value::Array(items) = value else {
        return ParsedResponse::Failure(FailureReason::NotJson);
    };
    let mut labels = BTreeSet::new();
    for item in items {
        let Value::String(name) = item else {
            return ParsedResponse::Failure(FailureReason::NotJson);
        };
        match space.index_of(name) {
            Some(k) => {
                labels.insert(k);
            }
            None => return ParsedResponse::Failure(FailureReason::UnknownLabel),
        }
    }
    if labels.is_empty() {
        return ParsedResponse::Failure(FailureReason::Empty);
    }
    ParsedResponse::Labels(SampleSelection { labels })
}

fn parse_vad(value: &Value) -> ParsedResponse {
    let Value::Object(map) = value else {
        return ParsedResponse::Failure(FailureReason::NotJson);
    };
    let mut dims = [0.0; 3];
    for (slot, key) in dims.iter_mut().zip(["V", "A", "D"]) {
        let Some(v) = map.get(key) else {
            return ParsedResponse::Failure(FailureReason::MissingKey);
        };
        let Some(x) = v.as_f64() else {
            return ParsedResponse::Failure(FailureReason::NotJson);
        };
        if !(Vad::MIN..=Vad::MAX).contains(&x) {
            return ParsedResponse::Failure(FailureReason::OutOfRange);
        }
        *slot = x;
    }
    ParsedResponse::Vad(Vad::from_dims(dims))
}
