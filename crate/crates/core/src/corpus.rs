//! Annotation corpora: loading, agreement tiers and stratified sampling.
//!
//! Two on-disk layouts are supported, both with a mandatory header row:
//!
//! - categorical TSV: `text_id<TAB>text<TAB>annotator_id<TAB>label,label,...`
//! - VAD CSV: `text_id,text,rater_id,V,A,D`
//!
//! Each data row carries one annotator's judgment. Rows are grouped into one
//! [`TextRecord`] per `text_id`. Invalid rows are rejected individually and
//! reported with their line number; a repeated `(text_id, annotator_id)` pair
//! rejects the whole file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::LabelSpace;
use crate::seed::SeedHasher;

/// One rater's Valence–Arousal–Dominance judgment on the 1–5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vad {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Vad {
    pub const MIN: f64 = 1.0;
    pub const MAX: f64 = 5.0;

    pub fn new(v: f64, a: f64, d: f64) -> Self {
        Self { v, a, d }
    }

    pub fn in_range(&self) -> bool {
        self.dims().iter().all(|x| (Self::MIN..=Self::MAX).contains(x))
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.v, self.a, self.d]
    }

    pub fn from_dims(d: [f64; 3]) -> Self {
        Self::new(d[0], d[1], d[2])
    }
}

/// Per-annotator label sets, stored as indices into a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoricalAnnotations {
    pub per_annotator: BTreeMap<String, BTreeSet<usize>>,
}

impl CategoricalAnnotations {
    pub fn from_named<'a, I, L>(space: &LabelSpace, entries: I) -> Option<Self>
    where
        I: IntoIterator<Item = (&'a str, L)>,
        L: IntoIterator<Item = &'a str>,
    {
        let mut per_annotator = BTreeMap::new();
        for (annotator, labels) in entries {
            let set = labels
                .into_iter()
                .map(|l| space.index_of(l))
                .collect::<Option<BTreeSet<_>>>()?;
            per_annotator.insert(annotator.to_string(), set);
        }
        Some(Self { per_annotator })
    }

    pub fn len(&self) -> usize {
        self.per_annotator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_annotator.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VadAnnotations {
    pub per_rater: BTreeMap<String, Vad>,
}

impl VadAnnotations {
    pub fn len(&self) -> usize {
        self.per_rater.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_rater.is_empty()
    }

    /// Per-dimension mean over raters.
    pub fn mean(&self) -> Option<Vad> {
        if self.per_rater.is_empty() {
            return None;
        }
        let n = self.per_rater.len() as f64;
        let mut sum = [0.0; 3];
        for vad in self.per_rater.values() {
            for (s, x) in sum.iter_mut().zip(vad.dims()) {
                *s += x;
            }
        }
        Some(Vad::from_dims(sum.map(|s| s / n)))
    }

    /// Per-dimension sample standard deviation (n − 1 denominator).
    pub fn sd(&self) -> Option<[f64; 3]> {
        let n = self.per_rater.len();
        if n < 2 {
            return None;
        }
        let mean = self.mean()?.dims();
        let mut ss = [0.0; 3];
        for vad in self.per_rater.values() {
            for ((s, x), m) in ss.iter_mut().zip(vad.dims()).zip(mean) {
                *s += (x - m) * (x - m);
            }
        }
        Some(ss.map(|s| (s / (n as f64 - 1.0)).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotations {
    Categorical(CategoricalAnnotations),
    Vad(VadAnnotations),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub text_id: String,
    pub text: String,
    pub annotations: Annotations,
}

impl TextRecord {
    pub fn categorical(&self) -> Option<&CategoricalAnnotations> {
        match &self.annotations {
            Annotations::Categorical(c) => Some(c),
            Annotations::Vad(_) => None,
        }
    }

    pub fn vad(&self) -> Option<&VadAnnotations> {
        match &self.annotations {
            Annotations::Vad(v) => Some(v),
            Annotations::Categorical(_) => None,
        }
    }

    /// Tier under the default thresholds.
    pub fn tier(&self) -> Result<AgreementTier, TierError> {
        match &self.annotations {
            Annotations::Categorical(c) => classify_agreement_categorical(c),
            Annotations::Vad(v) => classify_agreement_vad(
                v,
                DEFAULT_VAD_LOW_THRESHOLD,
                DEFAULT_VAD_HIGH_THRESHOLD,
            ),
        }
    }
}

/// Annotator agreement level of a text. The first three variants apply to
/// categorical corpora, the last three to VAD corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementTier {
    FullAgreement,
    Partial,
    FullDisagreement,
    High,
    Moderate,
    Low,
}

impl AgreementTier {
    pub const CATEGORICAL: [AgreementTier; 3] =
        [Self::FullAgreement, Self::Partial, Self::FullDisagreement];
    pub const VAD: [AgreementTier; 3] = [Self::High, Self::Moderate, Self::Low];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FullAgreement => "full_agreement",
            Self::Partial => "partial",
            Self::FullDisagreement => "full_disagreement",
            Self::High => "high",
            Self::Moderate => "moderate",
            Self::Low => "low",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::FullAgreement,
            Self::Partial,
            Self::FullDisagreement,
            Self::High,
            Self::Moderate,
            Self::Low,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

impl fmt::Display for AgreementTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_VAD_LOW_THRESHOLD: f64 = 0.3;
pub const DEFAULT_VAD_HIGH_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum TierError {
    #[error("text has {found} annotators; at least {required} are needed to assign a tier")]
    Untierable { found: usize, required: usize },
}

/// Why a single corpus row was not ingested.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("missing {0} value")]
    MissingDimension(&'static str),
    #[error("{dimension} value `{value}` is not a number")]
    NotANumber { dimension: &'static str, value: String },
    #[error("{dimension} value {value} outside [1, 5]")]
    OutOfRange { dimension: &'static str, value: f64 },
    #[error("text differs from an earlier row with the same text_id")]
    TextMismatch,
    #[error("empty text_id or annotator id")]
    MissingId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowRejection {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub text_id: Option<String>,
    pub error: RowError,
}

impl fmt::Display for RowRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Csv(#[from] csv::Error),
    #[error("file has no header row")]
    MissingHeader,
    #[error("duplicate annotation for text `{text_id}` by `{annotator_id}` at line {line}")]
    DuplicateAnnotation {
        text_id: String,
        annotator_id: String,
        line: u64,
    },
    #[error("tier {tier} has {available} texts but {requested} were requested (short by {})", requested - available)]
    InsufficientTier {
        tier: AgreementTier,
        requested: usize,
        available: usize,
    },
}

/// Result of loading a corpus file: the grouped records and every rejected row.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub records: Vec<TextRecord>,
    pub rejected: Vec<RowRejection>,
}

pub fn load_categorical_corpus(
    path: impl AsRef<Path>,
    space: &LabelSpace,
) -> Result<LoadedCorpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_categorical_corpus(file, space)
}

pub fn read_categorical_corpus<R: Read>(
    reader: R,
    space: &LabelSpace,
) -> Result<LoadedCorpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut grouper = Grouper::default();
    let mut rows = rdr.records();
    match rows.next() {
        Some(header) => {
            header?;
        }
        None => return Err(CorpusError::MissingHeader),
    }
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            grouper.reject(line, row.get(0), RowError::FieldCount { expected: 4, found: row.len() });
            continue;
        }
        let (text_id, text, annotator) = (&row[0], &row[1], &row[2]);
        if text_id.is_empty() || annotator.is_empty() {
            grouper.reject(line, Some(text_id), RowError::MissingId);
            continue;
        }
        let mut labels = BTreeSet::new();
        let mut bad = None;
        for name in row[3].split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match space.index_of(name) {
                Some(i) => {
                    labels.insert(i);
                }
                None => {
                    bad = Some(RowError::UnknownLabel(name.to_string()));
                    break;
                }
            }
        }
        if let Some(err) = bad {
            grouper.reject(line, Some(text_id), err);
            continue;
        }
        if labels.is_empty() {
            grouper.reject(line, Some(text_id), RowError::EmptyLabelSet);
            continue;
        }
        grouper.add(line, text_id, text, annotator, Judgment::Labels(labels))?;
    }
    Ok(grouper.finish())
}

pub fn load_vad_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_vad_corpus(file)
}

pub fn read_vad_corpus<R: Read>(reader: R) -> Result<LoadedCorpus, CorpusError> {
    const DIMS: [&str; 3] = ["V", "A", "D"];
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut grouper = Grouper::default();
    let mut rows = rdr.records();
    match rows.next() {
        Some(header) => {
            header?;
        }
        None => return Err(CorpusError::MissingHeader),
    }
    'rows: for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() < 3 || row.len() > 6 {
            grouper.reject(line, row.get(0), RowError::FieldCount { expected: 6, found: row.len() });
            continue;
        }
        let (text_id, text, rater) = (&row[0], &row[1], &row[2]);
        if text_id.is_empty() || rater.is_empty() {
            grouper.reject(line, Some(text_id), RowError::MissingId);
            continue;
        }
        let mut values = [0.0; 3];
        for (k, dim) in DIMS.iter().enumerate() {
            let raw = row.get(3 + k).map(str::trim).unwrap_or("");
            if raw.is_empty() {
                grouper.reject(line, Some(text_id), RowError::MissingDimension(dim));
                continue 'rows;
            }
            let value: f64 = match raw.parse() {
                Ok(v) => v,
                Err(_) => {
                    grouper.reject(
                        line,
                        Some(text_id),
                        RowError::NotANumber { dimension: dim, value: raw.to_string() },
                    );
                    continue 'rows;
                }
            };
            if !(Vad::MIN..=Vad::MAX).contains(&value) {
                grouper.reject(line, Some(text_id), RowError::OutOfRange { dimension: dim, value });
                continue 'rows;
            }
            values[k] = value;
        }
        grouper.add(line, text_id, text, rater, Judgment::Vad(Vad::from_dims(values)))?;
    }
    Ok(grouper.finish())
}

enum Judgment {
    Labels(BTreeSet<usize>),
    Vad(Vad),
}

#[derive(Default)]
struct Grouper {
    order: Vec<String>,
    records: HashMap<String, TextRecord>,
    rejected: Vec<RowRejection>,
}

impl Grouper {
    fn reject(&mut self, line: u64, text_id: Option<&str>, error: RowError) {
        self.rejected.push(RowRejection {
            line,
            text_id: text_id.map(str::to_string),
            error,
        });
    }

    fn add(
        &mut self,
        line: u64,
        text_id: &str,
        text: &str,
        annotator: &str,
        judgment: Judgment,
    ) -> Result<(), CorpusError> {
        let record = match self.records.get_mut(text_id) {
            Some(r) => r,
            None => {
                let annotations = match judgment {
                    Judgment::Labels(_) => Annotations::Categorical(Default::default()),
                    Judgment::Vad(_) => Annotations::Vad(Default::default()),
                };
                self.order.push(text_id.to_string());
                self.records.entry(text_id.to_string()).or_insert(TextRecord {
                    text_id: text_id.to_string(),
                    text: text.to_string(),
                    annotations,
                })
            }
        };
        if record.text != text {
            self.rejected.push(RowRejection {
                line,
                text_id: Some(text_id.to_string()),
                error: RowError::TextMismatch,
            });
            return Ok(());
        }
        let duplicate = match (&mut record.annotations, judgment) {
            (Annotations::Categorical(c), Judgment::Labels(set)) => {
                c.per_annotator.insert(annotator.to_string(), set).is_some()
            }
            (Annotations::Vad(v), Judgment::Vad(vad)) => {
                v.per_rater.insert(annotator.to_string(), vad).is_some()
            }
            _ => unreachable!("a loader only produces one judgment kind"),
        };
        if duplicate {
            return Err(CorpusError::DuplicateAnnotation {
                text_id: text_id.to_string(),
                annotator_id: annotator.to_string(),
                line,
            });
        }
        Ok(())
    }

    fn finish(mut self) -> LoadedCorpus {
        let records = self
            .order
            .iter()
            .filter_map(|id| self.records.remove(id))
            .collect();
        LoadedCorpus {
            records,
            rejected: self.rejected,
        }
    }
}

/// Full agreement when every annotator chose the identical label set, full
/// disagreement when every pair of label sets is disjoint, partial otherwise.
pub fn classify_agreement_categorical(
    ann: &CategoricalAnnotations,
) -> Result<AgreementTier, TierError> {
    let sets: Vec<&BTreeSet<usize>> = ann.per_annotator.values().collect();
    if sets.len() < 2 {
        return Err(TierError::Untierable { found: sets.len(), required: 2 });
    }
    if sets.iter().all(|s| *s == sets[0]) {
        return Ok(AgreementTier::FullAgreement);
    }
    let pairwise_disjoint = sets
        .iter()
        .enumerate()
        .all(|(i, a)| sets[i + 1..].iter().all(|b| a.is_disjoint(b)));
    Ok(if pairwise_disjoint {
        AgreementTier::FullDisagreement
    } else {
        AgreementTier::Partial
    })
}

/// Tier from the mean over V, A, D of the per-dimension sample SD.
pub fn classify_agreement_vad(
    ann: &VadAnnotations,
    low_threshold: f64,
    high_threshold: f64,
) -> Result<AgreementTier, TierError> {
    if ann.len() < 3 {
        return Err(TierError::Untierable { found: ann.len(), required: 3 });
    }
    let sd = ann.sd().expect("at least three raters");
    let mean_sd = sd.iter().sum::<f64>() / 3.0;
    Ok(if mean_sd < low_threshold {
        AgreementTier::High
    } else if mean_sd < high_threshold {
        AgreementTier::Moderate
    } else {
        AgreementTier::Low
    })
}

/// Draw exactly `per_tier_counts[tier]` texts from each tier.
///
/// Untierable records are ignored. Candidates are sorted by `text_id` before
/// a seeded shuffle, so the selection does not depend on input order. The
/// output lists tiers in their natural order, each in shuffled order.
pub fn stratified_sample(
    corpus: &[TextRecord],
    per_tier_counts: &BTreeMap<AgreementTier, usize>,
    seed: u64,
) -> Result<Vec<TextRecord>, CorpusError> {
    let mut by_tier: BTreeMap<AgreementTier, Vec<&TextRecord>> = BTreeMap::new();
    for record in corpus {
        if let Ok(tier) = record.tier() {
            by_tier.entry(tier).or_default().push(record);
        }
    }
    let mut out = Vec::with_capacity(per_tier_counts.values().sum());
    for (&tier, &count) in per_tier_counts {
        if count == 0 {
            continue;
        }
        let mut candidates = by_tier.remove(&tier).unwrap_or_default();
        if candidates.len() < count {
            return Err(CorpusError::InsufficientTier {
                tier,
                requested: count,
                available: candidates.len(),
            });
        }
        candidates.sort_by(|a, b| a.text_id.cmp(&b.text_id));
        candidates.dedup_by(|a, b| a.text_id == b.text_id);
        if candidates.len() < count {
            return Err(CorpusError::InsufficientTier {
                tier,
                requested: count,
                available: candidates.len(),
            });
        }
        let mut rng = SeedHasher::new(seed, "stratified_sample").str(tier.as_str()).rng();
        candidates.shuffle(&mut rng);
        out.extend(candidates.into_iter().take(count).cloned());
    }
    Ok(out)
}
