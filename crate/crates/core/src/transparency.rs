//! Lexical transparency of emotion categories.
//!
//! Each category gets two raw signals: the cosine between its label
//! embedding and the mean embedding of texts humans tagged with it, and the
//! share of those texts containing a word from the category's lexicon entry.
//! Both are min-max normalised across categories and averaged, and the
//! result is rank-correlated with per-category human–model agreement.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TextRecord;
use crate::dist::{human_distribution, DistError};
use crate::labels::LabelSpace;
use crate::metrics::{rank_correlation, Correlation, MetricsError};

#[derive(Debug, Error)]
pub enum TransparencyError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vector for {id} has dimension {found}, expected {expected}")]
    Dimension { id: String, expected: usize, found: usize },
    #[error("vector for {0} has zero norm")]
    ZeroNorm(String),
    #[error("duplicate {kind} id {id}")]
    Duplicate { kind: &'static str, id: String },
    #[error("no vector for {kind} {id}")]
    MissingVector { kind: &'static str, id: String },
    #[error("embedding file is empty")]
    Empty,
    #[error("category {0} has no positive texts")]
    NoPositives(String),
    #[error("similarity undefined for {0}: mean of positive vectors is zero")]
    ZeroMean(String),
    #[error("{component} is constant across categories; cannot min-max normalise")]
    Constant { component: &'static str },
    #[error("need at least 3 categories after exclusions, got {0}")]
    TooFewCategories(usize),
    #[error("no agreement value for category {0}")]
    MissingRho(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Text,
    Label,
}

impl EmbeddingKind {
    fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Text => "text",
            EmbeddingKind::Label => "label",
        }
    }
}

#[derive(Debug, Deserialize)]
struct EmbeddingLine {
    id: String,
    kind: EmbeddingKind,
    vector: Vec<f64>,
}

/// Text and label vectors sharing one dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    texts: HashMap<String, Vec<f64>>,
    labels: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            ..Self::default()
        }
    }

    pub fn insert(&mut self, kind: EmbeddingKind, id: impl Into<String>, vector: Vec<f64>) -> Result<(), TransparencyError> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(TransparencyError::Dimension {
                id,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().all(|&x| x == 0.0) || vector.iter().any(|x| !x.is_finite()) {
            return Err(TransparencyError::ZeroNorm(id));
        }
        let map = match kind {
            EmbeddingKind::Text => &mut self.texts,
            EmbeddingKind::Label => &mut self.labels,
        };
        if map.contains_key(&id) {
            return Err(TransparencyError::Duplicate { kind: kind.as_str(), id });
        }
        map.insert(id, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn text(&self, id: &str) -> Option<&[f64]> {
        self.texts.get(id).map(Vec::as_slice)
    }

    pub fn label(&self, id: &str) -> Option<&[f64]> {
        self.labels.get(id).map(Vec::as_slice)
    }

    pub fn text_count(&self) -> usize {
        self.texts.len()
    }

    /// Read the JSON-lines format and require a vector for every label.
    pub fn read<R: Read>(reader: R, space: &LabelSpace) -> Result<Self, TransparencyError> {
        let mut table: Option<Self> = None;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: EmbeddingLine = serde_json::from_str(&line).map_err(|e| TransparencyError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let t = table.get_or_insert_with(|| Self::new(parsed.vector.len()));
            t.insert(parsed.kind, parsed.id, parsed.vector)?;
        }
        let table = table.ok_or(TransparencyError::Empty)?;
        for label in space.labels() {
            if !table.labels.contains_key(label) {
                return Err(TransparencyError::MissingVector { kind: "label", id: label.clone() });
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>, space: &LabelSpace) -> Result<Self, TransparencyError> {
        Self::read(File::open(path)?, space)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine between the label vector and the mean of the positive texts' vectors.
pub fn embedding_similarity<S: AsRef<str>>(
    category: &str,
    positives: &[S],
    table: &EmbeddingTable,
) -> Result<f64, TransparencyError> {
    if positives.is_empty() {
        return Err(TransparencyError::NoPositives(category.to_string()));
    }
    let label = table.label(category).ok_or_else(|| TransparencyError::MissingVector {
        kind: "label",
        id: category.to_string(),
    })?;
    let mut centroid = vec![0.0; table.dimension()];
    for id in positives {
        let id = id.as_ref();
        let v = table.text(id).ok_or_else(|| TransparencyError::MissingVector {
            kind: "text",
            id: id.to_string(),
        })?;
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    let n = positives.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    cosine(label, &centroid).ok_or_else(|| TransparencyError::ZeroMean(category.to_string()))
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Category → associated lowercase words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    /// Read NRC-style `word<TAB>category<TAB>flag` rows, keeping flag 1.
    /// Categories outside `space` are dropped with a warning.
    pub fn read<R: Read>(reader: R, space: &LabelSpace) -> Result<Self, TransparencyError> {
        let mut entries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut ignored: BTreeSet<String> = BTreeSet::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [word, category, flag] = fields[..] else {
                return Err(TransparencyError::Parse {
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            };
            match flag.trim() {
                "1" => {}
                "0" => continue,
                other => {
                    return Err(TransparencyError::Parse {
                        line: i + 1,
                        message: format!("flag must be 0 or 1, got {other:?}"),
                    })
                }
            }
            let category = category.trim();
            if !space.contains(category) {
                ignored.insert(category.to_string());
                continue;
            }
            entries
                .entry(category.to_string())
                .or_default()
                .insert(word.trim().to_lowercase());
        }
        for c in &ignored {
            log::warn!("lexicon category {c} is not in the label space; ignored");
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>, space: &LabelSpace) -> Result<Self, TransparencyError> {
        Self::read(File::open(path)?, space)
    }
}

/// Share of texts whose token set meets the category's lexicon words.
/// A category missing from the lexicon scores 0.
pub fn lexicon_coverage<S: AsRef<str>>(
    category: &str,
    positive_texts: &[S],
    lexicon: &Lexicon,
) -> Result<f64, TransparencyError> {
    if positive_texts.is_empty() {
        return Err(TransparencyError::NoPositives(category.to_string()));
    }
    let Some(words) = lexicon.entries.get(category) else {
        log::warn!("category {category} has no lexicon entry; coverage set to 0");
        return Ok(0.0);
    };
    let hits = positive_texts
        .iter()
        .filter(|t| tokenize(t.as_ref()).iter().any(|w| words.contains(w)))
        .count();
    Ok(hits as f64 / positive_texts.len() as f64)
}

/// Unnormalised per-category signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub category: String,
    pub n_positive: usize,
    pub embedding_sim: f64,
    pub lexicon_cov: f64,
}

/// Raw signals for every category with at least one positive text
/// (human rate above zero). Categories without positives are skipped.
pub fn raw_scores(
    records: &[TextRecord],
    space: &LabelSpace,
    table: &EmbeddingTable,
    lexicon: &Lexicon,
) -> Result<Vec<RawScore>, TransparencyError> {
    let mut positives: Vec<Vec<&TextRecord>> = vec![Vec::new(); space.len()];
    for r in records {
        let Some(ann) = r.categorical() else { continue };
        let p = human_distribution(ann, space)?;
        for (k, &pk) in p.probs().iter().enumerate() {
            if pk > 0.0 {
                positives[k].push(r);
            }
        }
    }
    let mut out = Vec::new();
    for (k, pos) in positives.iter().enumerate() {
        let category = space.name(k).expect("index in range");
        if pos.is_empty() {
            log::warn!("category {category} has no positive texts; skipped");
            continue;
        }
        let ids: Vec<&str> = pos.iter().map(|r| r.text_id.as_str()).collect();
        let texts: Vec<&str> = pos.iter().map(|r| r.text.as_str()).collect();
        out.push(RawScore {
            category: category.to_string(),
            n_positive: pos.len(),
            embedding_sim: embedding_similarity(category, &ids, table)?,
            lexicon_cov: lexicon_coverage(category, &texts, lexicon)?,
        });
    }
    Ok(out)
}

/// Linear map of `xs` onto `[0, 1]`; errors when all values coincide.
pub fn min_max(xs: &[f64], component: &'static str) -> Result<Vec<f64>, TransparencyError> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(TransparencyError::Constant { component });
    }
    Ok(xs.iter().map(|x| (x - lo) / (hi - lo)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTransparency {
    pub category: String,
    pub embedding_sim: f64,
    pub lexicon_cov: f64,
    pub embedding_norm: f64,
    pub lexicon_norm: f64,
    pub combined: f64,
    pub mean_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictivity {
    pub embedding: Correlation,
    pub lexicon: Correlation,
    pub combined: Correlation,
}

impl Predictivity {
    pub fn rows(&self) -> [(&'static str, &Correlation); 3] {
        [
            ("embedding", &self.embedding),
            ("lexicon", &self.lexicon),
            ("combined", &self.combined),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparencyTable {
    pub categories: Vec<CategoryTransparency>,
    pub excluded: Vec<String>,
    pub predictivity: Predictivity,
}

/// Normalise both components over the included categories, average them,
/// and rank-correlate each score with the per-category mean ρ.
pub fn transparency_table(
    raw: &[RawScore],
    mean_rho: &BTreeMap<String, f64>,
    exclusions: &BTreeSet<String>,
) -> Result<TransparencyTable, TransparencyError> {
    let included: Vec<&RawScore> = raw.iter().filter(|r| !exclusions.contains(&r.category)).collect();
    if included.len() < 3 {
        return Err(TransparencyError::TooFewCategories(included.len()));
    }
    let rho = included
        .iter()
        .map(|r| {
            mean_rho
                .get(&r.category)
                .copied()
                .ok_or_else(|| TransparencyError::MissingRho(r.category.clone()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let emb: Vec<f64> = included.iter().map(|r| r.embedding_sim).collect();
    let lex: Vec<f64> = included.iter().map(|r| r.lexicon_cov).collect();
    let emb_n = min_max(&emb, "embedding similarity")?;
    let lex_n = min_max(&lex, "lexicon coverage")?;
    let combined: Vec<f64> = emb_n.iter().zip(&lex_n).map(|(a, b)| (a + b) / 2.0).collect();
    let predictivity = Predictivity {
        embedding: rank_correlation(&emb_n, &rho)?,
        lexicon: rank_correlation(&lex_n, &rho)?,
        combined: rank_correlation(&combined, &rho)?,
    };
    let categories = included
        .iter()
        .enumerate()
        .map(|(i, r)| CategoryTransparency {
            category: r.category.clone(),
            embedding_sim: r.embedding_sim,
            lexicon_cov: r.lexicon_cov,
            embedding_norm: emb_n[i],
            lexicon_norm: lex_n[i],
            combined: combined[i],
            mean_rho: rho[i],
        })
        .collect();
    let excluded = raw
        .iter()
        .filter(|r| exclusions.contains(&r.category))
        .map(|r| r.category.clone())
        .collect();
    Ok(TransparencyTable {
        categories,
        excluded,
        predictivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3);
        t.insert(EmbeddingKind::Label, "joy", vec![1.0, 0.0, 0.0]).unwrap();
        t.insert(EmbeddingKind::Text, "t1", vec![1.0, 0.0, 0.0]).unwrap();
        t.insert(EmbeddingKind::Text, "t2", vec![0.0, 1.0, 0.0]).unwrap();
        t.insert(EmbeddingKind::Text, "t3", vec![0.0, 2.0, 1.0]).unwrap();
        t.insert(EmbeddingKind::Text, "t4", vec![-1.0, 0.0, 0.0]).unwrap();
        t
    }

    #[test]
    fn similarity_cases() {
        let t = table();
        assert!((embedding_similarity("joy", &["t1", "t1"], &t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(embedding_similarity("joy", &["t2", "t3"], &t).unwrap(), 0.0);
        // (t1 + t2)/2 = (.5, .5, 0) → cos = .5 / (1 · √.5)
        let expected = 0.5 / 0.5f64.sqrt();
        assert!((embedding_similarity("joy", &["t1", "t2"], &t).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            embedding_similarity("joy", &["t1", "t4"], &t),
            Err(TransparencyError::ZeroMean(_))
        ));
        assert!(matches!(
            embedding_similarity("joy", &["zz"], &t),
            Err(TransparencyError::MissingVector { kind: "text", .. })
        ));
        assert!(matches!(
            embedding_similarity::<&str>("joy", &[], &t),
            Err(TransparencyError::NoPositives(_))
        ));
    }

    #[test]
    fn table_validation() {
        let mut t = EmbeddingTable::new(2);
        assert!(matches!(
            t.insert(EmbeddingKind::Text, "a", vec![1.0]),
            Err(TransparencyError::Dimension { .. })
        ));
        assert!(matches!(
            t.insert(EmbeddingKind::Text, "a", vec![0.0, 0.0]),
            Err(TransparencyError::ZeroNorm(_))
        ));
        let space = LabelSpace::new(["x", "y"]).unwrap();
        let file = "{\"id\":\"x\",\"kind\":\"label\",\"vector\":[1,0]}\n";
        assert!(matches!(
            EmbeddingTable::read(file.as_bytes(), &space),
            Err(TransparencyError::MissingVector { kind: "label", .. })
        ));
        let file = format!("{file}{{\"id\":\"y\",\"kind\":\"label\",\"vector\":[0,1]}}\n{{\"id\":\"t\",\"kind\":\"text\",\"vector\":[1,1]}}\n");
        let t = EmbeddingTable::read(file.as_bytes(), &space).unwrap();
        assert_eq!(t.text_count(), 1);
    }

    #[test]
    fn lexicon_and_coverage() {
        let space = LabelSpace::new(["joy", "fear"]).unwrap();
        let src = "happy\tjoy\t1\nglad\tjoy\t1\nsad\tjoy\t0\nscary\tfear\t1\nwhat\tsurprise\t1\n";
        let lex = Lexicon::read(src.as_bytes(), &space).unwrap();
        assert_eq!(lex.entries["joy"].len(), 2);
        assert!(!lex.entries.contains_key("surprise"));
        let texts = ["I'm so HAPPY!", "glad-to-see", "sad day", "nothing"];
        assert_eq!(lexicon_coverage("joy", &texts, &lex).unwrap(), 0.5);
        assert_eq!(lexicon_coverage("joy", &texts[..2], &lex).unwrap(), 1.0);
        assert_eq!(lexicon_coverage("joy", &texts[2..], &lex).unwrap(), 0.0);
        assert_eq!(lexicon_coverage("fear", &["so scary", "a", "b", "c"], &lex).unwrap(), 0.25);
        assert_eq!(lexicon_coverage("anger", &texts, &lex).unwrap(), 0.0);
        assert!(Lexicon::read("a\tjoy\n".as_bytes(), &space).is_err());
    }

    #[test]
    fn tokenizer() {
        let t = tokenize("Don't-stop  me NOW!!");
        let expected: HashSet<String> = ["don", "t", "stop", "me", "now"].iter().map(|s| s.to_string()).collect();
        assert_eq!(t, expected);
    }

    fn raw(n: usize) -> Vec<RawScore> {
        (0..n)
            .map(|i| RawScore {
                category: format!("c{i}"),
                n_positive: 1,
                embedding_sim: i as f64 / (n - 1) as f64,
                lexicon_cov: (i as f64).sqrt() / 10.0,
            })
            .collect()
    }

    #[test]
    fn table_monotone_gives_unit_rho() {
        let r = raw(28);
        let rho: BTreeMap<String, f64> = r.iter().enumerate().map(|(i, s)| (s.category.clone(), (i as f64).powi(3) - 5.0)).collect();
        let t = transparency_table(&r, &rho, &BTreeSet::new()).unwrap();
        assert!((t.predictivity.combined.rho - 1.0).abs() < 1e-9);
        assert_eq!(t.categories[0].embedding_norm, 0.0);
        assert_eq!(t.categories[27].embedding_norm, 1.0);
        // already spanning [0, 1], so normalisation is the identity
        for c in &t.categories {
            assert!((c.embedding_norm - c.embedding_sim).abs() < 1e-12);
        }
        assert_eq!(t.predictivity.rows().map(|(n, _)| n), ["embedding", "lexicon", "combined"]);
    }

    #[test]
    fn table_errors() {
        let r = raw(4);
        let rho: BTreeMap<String, f64> = r.iter().map(|s| (s.category.clone(), 0.1)).collect();
        let excl: BTreeSet<String> = ["c0".to_string(), "c1".to_string()].into();
        assert!(matches!(
            transparency_table(&r, &rho, &excl),
            Err(TransparencyError::TooFewCategories(2))
        ));
        let mut flat = raw(4);
        flat.iter_mut().for_each(|s| s.lexicon_cov = 0.3);
        assert!(matches!(
            transparency_table(&flat, &rho, &BTreeSet::new()),
            Err(TransparencyError::Constant { .. })
        ));
    }
}
