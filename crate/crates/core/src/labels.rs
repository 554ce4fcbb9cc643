//! Ordered emotion category space.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The 27 GoEmotions emotions followed by `neutral`, in prompt order.
pub const GOEMOTIONS_LABELS: [&str; 28] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
    "neutral",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelSpaceError {
    #[error("label space must contain at least one label")]
    Empty,
    #[error("duplicate label `{0}`")]
    Duplicate(String),
    #[error("label names must be non-empty")]
    BlankLabel,
}

/// Ordered, duplicate-free list of category names.
///
/// Every [`CategoricalDistribution`](crate::CategoricalDistribution) built
/// against a space uses its order for indexing.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, LabelSpaceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(LabelSpaceError::Empty);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(LabelSpaceError::BlankLabel);
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(LabelSpaceError::Duplicate(label.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    /// The default 28-category GoEmotions space.
    pub fn goemotions() -> Self {
        Self::new(GOEMOTIONS_LABELS).expect("static label list is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Hex SHA-256 over the newline-joined ordered label names.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (i, label) in self.labels.iter().enumerate() {
            if i > 0 {
                hasher.update(b"\n");
            }
            hasher.update(label.as_bytes());
        }
        hex(&hasher.finalize())
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        Self::goemotions()
    }
}

impl fmt::Debug for LabelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("LabelSpace").field(&self.labels).finish()
    }
}

impl TryFrom<Vec<String>> for LabelSpace {
    type Error = LabelSpaceError;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(value: LabelSpace) -> Self {
        value.labels
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
