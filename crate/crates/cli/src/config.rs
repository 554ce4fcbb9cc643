//! Pipeline configuration, read from a single TOML file.
//!
//! Relative paths resolve against the directory holding the config file.
//! See `README.md` for the full schema; `emodist demo-data` writes a
//! working example.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use emodist::calibrate::Method;
use emodist::sampler::SamplerConfig;
use emodist::{AgreementTier, LabelSpace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

pub const DEFAULT_API_KEY_ENV: &str = "EMODIST_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its own from this.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Ordered category names. Defaults to the 28 GoEmotions labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    /// Precomputed per-text distributions (e.g. a fine-tuned classifier).
    #[serde(default)]
    pub external: Vec<ExternalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transparency: Option<TransparencyConfig>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    /// Directory that relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub categorical: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vad: Option<PathBuf>,
    /// Stratified core set: texts to draw per tier. Absent means every
    /// tierable text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<BTreeMap<AgreementTier, usize>>,
    /// VAD tiers use the default SD thresholds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vad_tiers: Option<BTreeMap<AgreementTier, usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Seeded stand-in that answers from the human annotations.
    Mock,
    /// Chat-completions endpoint.
    Http,
    /// Responses collected elsewhere; the sample stage leaves them alone.
    Store,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Display name, and the `model` field of its store records.
    pub name: String,
    pub backend: BackendKind,
    /// Identifier sent to the endpoint; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Free-form grouping (e.g. "api", "open") for group-level tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical_store: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vad_store: Option<PathBuf>,
    #[serde(default)]
    pub mock: MockConfig,
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Weight moved from the human distribution onto `lean` (or uniform).
    pub mix: f64,
    pub lean: Option<String>,
    pub garbage_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self { mix: 0.3, lean: None, garbage_rate: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransparencyConfig {
    pub embeddings: PathBuf,
    pub lexicon: PathBuf,
    /// Secondary analysis drops categories with fewer positives than this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_positive: Option<usize>,
    #[serde(default)]
    pub exclude: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub k: usize,
    pub methods: Vec<String>,
    /// Models to calibrate; defaults to every sampled model.
    pub models: Option<Vec<String>>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            k: 5,
            methods: Method::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            models: None,
        }
    }
}

impl CalibrationConfig {
    pub fn methods(&self) -> Result<Vec<Method>, PipelineError> {
        self.methods
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| PipelineError::Config(format!("unknown calibration method {m:?}"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub bootstrap_iterations: usize,
    pub level: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            bootstrap_iterations: emodist::stats::DEFAULT_BOOTSTRAP_ITERATIONS,
            level: emodist::stats::DEFAULT_LEVEL,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Read `path`, resolve relative paths against its directory and validate.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        for p in self.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self.base_dir = Some(base.to_path_buf());
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut out = vec![&mut self.output_dir, &mut self.corpus.categorical];
        out.extend(self.corpus.vad.as_mut());
        for m in &mut self.models {
            out.extend(m.categorical_store.as_mut());
            out.extend(m.vad_store.as_mut());
        }
        out.extend(self.external.iter_mut().map(|e| &mut e.path));
        if let Some(t) = self.transparency.as_mut() {
            out.push(&mut t.embeddings);
            out.push(&mut t.lexicon);
        }
        out
    }

    pub fn label_space(&self) -> Result<LabelSpace, PipelineError> {
        match &self.labels {
            None => Ok(LabelSpace::goemotions()),
            Some(l) => LabelSpace::new(l.iter().cloned()).map_err(|e| PipelineError::Config(e.to_string())),
        }
    }

    /// Every check that can run before a stage touches disk.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let space = self.label_space()?;
        self.sampler.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.calibration.methods()?;
        if self.calibration.k < 2 {
            return Err(PipelineError::Config("calibration.k must be at least 2".into()));
        }
        if !(self.stats.level > 0.0 && self.stats.level < 1.0) || self.stats.bootstrap_iterations == 0 {
            return Err(PipelineError::Config("stats.level must lie in (0, 1) and iterations be positive".into()));
        }

        let mut names = BTreeSet::new();
        for name in self.models.iter().map(|m| &m.name).chain(self.external.iter().map(|e| &e.name)) {
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(PipelineError::Config(format!("model name {name:?} is not usable as a file name")));
            }
            if !names.insert(name) {
                return Err(PipelineError::Config(format!("model name {name:?} appears twice")));
            }
        }
        if let Some(list) = &self.calibration.models {
            for m in list {
                if !names.contains(m) {
                    return Err(PipelineError::Config(format!("calibration model {m:?} is not configured")));
                }
            }
        }

        let mut required: Vec<(&str, &Path)> = vec![("corpus.categorical", &self.corpus.categorical)];
        if let Some(p) = &self.corpus.vad {
            required.push(("corpus.vad", p));
        }
        for m in &self.models {
            match m.backend {
                BackendKind::Http if m.base_url.is_none() => {
                    // the sample stage also accepts --base-url
                }
                BackendKind::Mock => {
                    let mc = &m.mock;
                    if !(0.0..=1.0).contains(&mc.mix) || !(0.0..=1.0).contains(&mc.garbage_rate) {
                        return Err(PipelineError::Config(format!("{}: mock mix and garbage_rate must lie in [0, 1]", m.name)));
                    }
                    if let Some(l) = &mc.lean {
                        if !space.contains(l) {
                            return Err(PipelineError::Config(format!("{}: mock lean {l:?} is not a label", m.name)));
                        }
                    }
                }
                BackendKind::Store => {
                    let store = m.categorical_store.as_ref().ok_or_else(|| {
                        PipelineError::Config(format!("{}: store backend needs categorical_store", m.name))
                    })?;
                    required.push(("models.categorical_store", store));
                    if let (Some(p), Some(_)) = (&m.vad_store, &self.corpus.vad) {
                        required.push(("models.vad_store", p));
                    }
                }
                _ => {}
            }
        }
        for e in &self.external {
            required.push(("external.path", &e.path));
        }
        if let Some(t) = &self.transparency {
            required.push(("transparency.embeddings", &t.embeddings));
            required.push(("transparency.lexicon", &t.lexicon));
            for c in &t.exclude {
                if !space.contains(c) {
                    return Err(PipelineError::Config(format!("transparency.exclude: {c:?} is not a label")));
                }
            }
        }
        for (field, path) in required {
            if !path.is_file() {
                return Err(PipelineError::Config(format!("{field}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Every model name whose distributions reach the metrics stages.
    pub fn all_model_names(&self) -> Vec<String> {
        self.models
            .iter()
            .map(|m| m.name.clone())
            .chain(self.external.iter().map(|e| e.name.clone()))
            .collect()
    }

    pub fn calibration_models(&self) -> Vec<String> {
        match &self.calibration.models {
            Some(list) => list.clone(),
            None => self.models.iter().map(|m| m.name.clone()).collect(),
        }
    }

    pub fn categorical_store(&self, model: &ModelConfig) -> PathBuf {
        model
            .categorical_store
            .clone()
            .unwrap_or_else(|| self.output_dir.join("responses").join(format!("{}.categorical.jsonl", model.name)))
    }

    pub fn vad_store(&self, model: &ModelConfig) -> PathBuf {
        model
            .vad_store
            .clone()
            .unwrap_or_else(|| self.output_dir.join("responses").join(format!("{}.vad.jsonl", model.name)))
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    /// SHA-256 of the config with paths taken relative to `base_dir`, so
    /// moving the whole project does not change it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        if let Some(base) = c.base_dir.take() {
            for p in c.paths_mut() {
                if let Ok(rel) = p.strip_prefix(&base) {
                    *p = rel.to_path_buf();
                }
            }
        }
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
