//! Categorical distributions built from annotator or sample counts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CategoricalAnnotations;
use crate::labels::LabelSpace;

/// Tolerance on the sum of a distribution's entries.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Temperatures closer than this are treated as equal when filtering samples.
const TEMPERATURE_MATCH: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("distribution has {found} entries, label space has {expected}")]
    Length { expected: usize, found: usize },
    #[error("entry {index} is negative or not finite ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("entries sum to {0}, expected 1")]
    Sum(f64),
    #[error("no selections to normalise")]
    NoSelections,
    #[error("no samples left after temperature filter")]
    NoSamples,
    #[error("label index {0} outside label space")]
    LabelIndex(usize),
}

/// Probability vector aligned to a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    /// Validates non-negativity and that entries sum to 1 within [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.is_empty() {
            return Err(DistError::Length { expected: 1, found: 0 });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DistError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistError::Sum(sum));
        }
        Ok(Self { probs })
    }

    /// Scales non-negative weights to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DistError> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DistError::InvalidEntry { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(DistError::NoSelections);
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Like [`from_weights`](Self::from_weights) but falls back to uniform when
    /// every weight is zero.
    pub fn from_weights_or_uniform(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self::from_weights(weights).unwrap_or_else(|_| Self::uniform(n))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one category");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        assert!(index < n);
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// Index of the first maximal entry.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }

    pub fn check_space(&self, space: &LabelSpace) -> Result<(), DistError> {
        if self.len() != space.len() {
            return Err(DistError::Length {
                expected: space.len(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for CategoricalDistribution {
    type Error = DistError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<CategoricalDistribution> for Vec<f64> {
    fn from(value: CategoricalDistribution) -> Self {
        value.probs
    }
}

/// One LLM sample's parsed label set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleSelection {
    pub labels: BTreeSet<usize>,
}

impl SampleSelection {
    pub fn new(labels: impl IntoIterator<Item = usize>) -> Self {
        Self {
            labels: labels.into_iter().collect(),
        }
    }

    pub fn from_names<'a>(
        space: &LabelSpace,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Option<Self> {
        names
            .into_iter()
            .map(|n| space.index_of(n))
            .collect::<Option<BTreeSet<_>>>()
            .map(|labels| Self { labels })
    }
}

fn normalise_selections<'a>(
    sets: impl IntoIterator<Item = &'a BTreeSet<usize>>,
    n: usize,
) -> Result<CategoricalDistribution, DistError> {
    let mut counts = vec![0.0; n];
    for set in sets {
        for &k in set {
            *counts.get_mut(k).ok_or(DistError::LabelIndex(k))? += 1.0;
        }
    }
    CategoricalDistribution::from_weights(counts)
}

/// Fraction of all selections that name each category.
///
/// Multi-label annotators contribute one selection per label, so the
/// normaliser is the total selection count rather than the annotator count.
pub fn human_distribution(
    ann: &CategoricalAnnotations,
    space: &LabelSpace,
) -> Result<CategoricalDistribution, DistError> {
    normalise_selections(ann.per_annotator.values(), space.len())
}

/// Same count-and-normalise rule over `(temperature, selection)` samples,
/// optionally restricted to a subset of temperatures.
pub fn llm_distribution(
    samples: &[(f64, SampleSelection)],
    space: &LabelSpace,
    filter: Option<&[f64]>,
) -> Result<CategoricalDistribution, DistError> {
    let keep = |t: f64| match filter {
        None => true,
        Some(temps) => temps.iter().any(|&f| (f - t).abs() < TEMPERATURE_MATCH),
    };
    let mut any = false;
    let selected = samples.iter().filter(|(t, _)| keep(*t)).map(|(_, s)| {
        any = true;
        &s.labels
    });
    let result = normalise_selections(selected, space.len());
    if !any {
        return Err(DistError::NoSamples);
    }
    result
}

/// Shannon entropy in bits with the `0 · log 0 = 0` convention.
pub fn entropy(d: &CategoricalDistribution) -> f64 {
    let h: f64 = d
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // A point mass gives -1·log2(1) = -0.0; report +0.
    h.max(0.0)
}
