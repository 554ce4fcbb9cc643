//! Append-only JSON-lines response store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{FailureReason, ParsedResponse};
use super::SamplerError;
use crate::corpus::Vad;
use crate::dist::SampleSelection;
use crate::labels::LabelSpace;

/// On-disk form of a parsed response: labels by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoredParsed {
    Labels(Vec<String>),
    Vad(Vad),
    Failure(FailureReason),
}

impl StoredParsed {
    pub fn from_parsed(parsed: &ParsedResponse, space: &LabelSpace) -> Self {
        match parsed {
            ParsedResponse::Labels(sel) => StoredParsed::Labels(
                sel.labels
                    .iter()
                    .map(|&k| space.name(k).expect("parsed label in space").to_string())
                    .collect(),
            ),
            ParsedResponse::Vad(v) => StoredParsed::Vad(*v),
            ParsedResponse::Failure(r) => StoredParsed::Failure(*r),
        }
    }

    /// Labels absent from `space` turn into an `unknown_label` failure.
    pub fn to_parsed(&self, space: &LabelSpace) -> ParsedResponse {
        match self {
            StoredParsed::Labels(names) => match SampleSelection::from_names(space, names.iter().map(String::as_str)) {
                Some(sel) if !sel.labels.is_empty() => ParsedResponse::Labels(sel),
                Some(_) => ParsedResponse::Failure(FailureReason::Empty),
                None => ParsedResponse::Failure(FailureReason::UnknownLabel),
            },
            StoredParsed::Vad(v) => ParsedResponse::Vad(*v),
            StoredParsed::Failure(r) => ParsedResponse::Failure(*r),
        }
    }

    pub fn failure(&self) -> Option<FailureReason> {
        match self {
            StoredParsed::Failure(r) => Some(*r),
            _ => None,
        }
    }
}

/// One attempt at one `(text, model, temperature, sample)` tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub text_id: String,
    pub model: String,
    pub temperature: f64,
    pub sample_index: u32,
    /// `None` when the backend never answered.
    pub raw: Option<String>,
    pub parsed: StoredParsed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// Identity of a tuple; temperatures compare by bit pattern.
pub type TupleKey = (String, String, u64, u32);

impl StoreRecord {
    pub fn key(&self) -> TupleKey {
        (self.text_id.clone(), self.model.clone(), self.temperature.to_bits(), self.sample_index)
    }

    /// Whether a response was obtained (parse failures count as complete).
    pub fn is_complete(&self) -> bool {
        self.parsed.failure() != Some(FailureReason::BackendError)
    }
}

pub fn read_store<R: Read>(reader: R) -> Result<Vec<StoreRecord>, SamplerError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| SamplerError::StoreLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Missing file reads as an empty store.
pub fn load_store(path: impl AsRef<Path>) -> Result<Vec<StoreRecord>, SamplerError> {
    match File::open(path) {
        Ok(f) => read_store(f),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

/// Last record per tuple, in key order.
pub fn latest_records(records: Vec<StoreRecord>) -> Vec<StoreRecord> {
    let mut latest: BTreeMap<TupleKey, StoreRecord> = BTreeMap::new();
    for r in records {
        latest.insert(r.key(), r);
    }
    latest.into_values().collect()
}

pub struct StoreWriter {
    out: BufWriter<File>,
}

impl StoreWriter {
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self, SamplerError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: BufWriter::new(file) })
    }

    /// Write one line and flush, so an interrupted run loses nothing written.
    pub fn append(&mut self, record: &StoreRecord) -> Result<(), SamplerError> {
        let line = serde_json::to_string(record).expect("record serialises");
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_store(path: impl AsRef<Path>, records: &[StoreRecord]) -> Result<(), SamplerError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serialises");
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Successful categorical samples per text for one model.
pub fn categorical_samples(
    records: &[StoreRecord],
    model: &str,
    space: &LabelSpace,
) -> BTreeMap<String, Vec<(f64, SampleSelection)>> {
    let mut out: BTreeMap<String, Vec<(f64, SampleSelection)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.model == model) {
        if let ParsedResponse::Labels(sel) = r.parsed.to_parsed(space) {
            out.entry(r.text_id.clone()).or_default().push((r.temperature, sel));
        }
    }
    out
}

/// Successful VAD samples per text for one model.
pub fn vad_samples(records: &[StoreRecord], model: &str) -> BTreeMap<String, Vec<(f64, Vad)>> {
    let mut out: BTreeMap<String, Vec<(f64, Vad)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.model == model) {
        if let StoredParsed::Vad(v) = r.parsed {
            out.entry(r.text_id.clone()).or_default().push((r.temperature, v));
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureStats {
    pub total: usize,
    pub failures: BTreeMap<FailureReason, usize>,
    pub failure_rate: f64,
}

/// Failure counts per model.
pub fn failure_stats(records: &[StoreRecord]) -> BTreeMap<String, FailureStats> {
    let mut out: BTreeMap<String, FailureStats> = BTreeMap::new();
    for r in records {
        let s = out.entry(r.model.clone()).or_default();
        s.total += 1;
        if let Some(reason) = r.parsed.failure() {
            *s.failures.entry(reason).or_default() += 1;
        }
    }
    for s in out.values_mut() {
        s.failure_rate = s.failures.values().sum::<usize>() as f64 / s.total as f64;
    }
    out
}
