//! Precomputed per-text distributions, e.g. a fine-tuned classifier's
//! softmax outputs. They enter the same metric path as LLM distributions.
//!
//! Format: CSV with header `text_id,<label>,<label>,...`. Every label of the
//! space must appear exactly once; column order is free.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use emodist::{CategoricalDistribution, LabelSpace};
use serde::Serialize;

use crate::PipelineError;

/// Row sums inside `[1 - SUM_TOLERANCE, 1 + SUM_TOLERANCE]` are renormalised.
pub const SUM_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExternalRowError {
    FieldCount { expected: usize, found: usize },
    NotANumber { label: String, value: String },
    Negative { label: String, value: f64 },
    SumOutOfTolerance { sum: f64 },
    DuplicateTextId,
    UnknownTextId,
}

impl fmt::Display for ExternalRowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FieldCount { expected, found } => write!(f, "expected {expected} fields, found {found}"),
            Self::NotANumber { label, value } => write!(f, "{label}: {value:?} is not a number"),
            Self::Negative { label, value } => write!(f, "{label}: negative probability {value}"),
            Self::SumOutOfTolerance { sum } => write!(f, "row sums to {sum}"),
            Self::DuplicateTextId => write!(f, "text_id already seen"),
            Self::UnknownTextId => write!(f, "text_id not in the corpus"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRejection {
    pub line: u64,
    pub text_id: String,
    pub error: ExternalRowError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalDistributions {
    pub rows: Vec<(String, CategoricalDistribution)>,
    pub rejected: Vec<ExternalRejection>,
}

/// Parse, validate and renormalise external distributions. Header problems
/// fail the whole file; row problems reject only that row.
pub fn ingest_external_distributions<R: Read>(
    reader: R,
    space: &LabelSpace,
) -> Result<ExternalDistributions, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| PipelineError::Artifact(e.to_string()))?.clone();
    if header.get(0).map(str::trim) != Some("text_id") {
        return Err(PipelineError::Artifact("first column must be text_id".into()));
    }
    // column j + 1 holds the probability of category column_of[j]
    let mut column_of = Vec::with_capacity(header.len().saturating_sub(1));
    let mut seen = vec![false; space.len()];
    for name in header.iter().skip(1).map(str::trim) {
        let k = space
            .index_of(name)
            .ok_or_else(|| PipelineError::Artifact(format!("column {name:?} is not a label")))?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(PipelineError::Artifact(format!("column {name:?} appears twice")));
        }
        column_of.push(k);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(PipelineError::Artifact(format!("missing column {:?}", space.name(k).unwrap_or("?"))));
    }

    let mut out = ExternalDistributions::default();
    let mut ids = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| PipelineError::Artifact(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let text_id = row.get(0).unwrap_or("").trim().to_string();
        match parse_row(&row, &column_of, space) {
            Ok(dist) => {
                if !ids.insert(text_id.clone()) {
                    out.rejected.push(ExternalRejection { line, text_id, error: ExternalRowError::DuplicateTextId });
                } else {
                    out.rows.push((text_id, dist));
                }
            }
            Err(error) => out.rejected.push(ExternalRejection { line, text_id, error }),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    column_of: &[usize],
    space: &LabelSpace,
) -> Result<CategoricalDistribution, ExternalRowError> {
    if row.len() != column_of.len() + 1 {
        return Err(ExternalRowError::FieldCount { expected: column_of.len() + 1, found: row.len() });
    }
    let mut probs = vec![0.0; space.len()];
    for (j, &k) in column_of.iter().enumerate() {
        let raw = row[j + 1].trim();
        let label = space.name(k).unwrap_or("?").to_string();
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| ExternalRowError::NotANumber { label: label.clone(), value: raw.to_string() })?;
        if value < 0.0 {
            return Err(ExternalRowError::Negative { label, value });
        }
        probs[k] = value;
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(ExternalRowError::SumOutOfTolerance { sum });
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    CategoricalDistribution::new(probs).map_err(|_| ExternalRowError::SumOutOfTolerance { sum })
}
