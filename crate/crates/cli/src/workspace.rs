//! Output directory bookkeeping: artifact reads and writes, and the
//! manifest that records hashes, seeds and inputs for each artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::{PipelineError, Stage};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub root_seed: u64,
    pub config_hash: String,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: Stage,
    pub sha256: String,
    pub seed: u64,
    pub config_hash: String,
    /// Hash of every file the producing stage read.
    pub inputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub struct Workspace {
    root: PathBuf,
    manifest: Manifest,
    config_hash: String,
    root_seed: u64,
    input_base: Option<PathBuf>,
    current: Option<StageLog>,
}

struct StageLog {
    stage: Stage,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Workspace {
    /// `input_base` shortens manifest keys of files outside `root`.
    pub fn open(root: &Path, root_seed: u64, config_hash: &str, input_base: Option<&Path>) -> Result<Self, PipelineError> {
        let manifest = match std::fs::read(root.join(MANIFEST)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| PipelineError::Artifact(format!("{MANIFEST}: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            config_hash: config_hash.to_string(),
            root_seed,
            input_base: input_base.map(Path::to_path_buf),
            current: None,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Manifest key for a path: relative to the output directory when
    /// inside it, else relative to the input base, else as given.
    pub fn key(&self, path: &Path) -> String {
        let rel = path
            .strip_prefix(&self.root)
            .ok()
            .or_else(|| self.input_base.as_deref().and_then(|b| path.strip_prefix(b).ok()))
            .unwrap_or(path);
        rel.to_string_lossy().replace('\\', "/")
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        emodist::seed::derive(self.root_seed, stage.as_str())
    }

    pub fn begin(&mut self, stage: Stage) {
        self.current = Some(StageLog { stage, inputs: BTreeMap::new(), outputs: BTreeMap::new() });
    }

    fn log(&mut self) -> &mut StageLog {
        self.current.as_mut().expect("begin() before reading or writing artifacts")
    }

    /// Inputs read so far by the running stage.
    pub fn inputs(&self) -> BTreeMap<String, String> {
        self.current.as_ref().map(|l| l.inputs.clone()).unwrap_or_default()
    }

    /// Read an artifact produced by `producer`, naming that stage when the
    /// file is missing.
    pub fn read(&mut self, rel: &str, producer: Stage) -> Result<Vec<u8>, PipelineError> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => PipelineError::MissingArtifact { path: rel.to_string(), stage: producer },
            _ => PipelineError::Io(e),
        })?;
        let hash = sha256_hex(&bytes);
        self.log().inputs.insert(rel.to_string(), hash);
        Ok(bytes)
    }

    /// Read a file from outside the pipeline (corpus, lexicon, ...).
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let bytes = std::fs::read(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let key = self.key(path);
        let hash = sha256_hex(&bytes);
        self.log().inputs.insert(key, hash);
        Ok(bytes)
    }

    /// Record a file that another component wrote (the response stores).
    pub fn register(&mut self, path: &Path) -> Result<(), PipelineError> {
        let bytes = std::fs::read(path)?;
        let key = self.key(path);
        self.log().outputs.insert(key, sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.log().outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), PipelineError> {
        let bytes = csv_bytes(rows)?;
        self.write(rel, &bytes)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<(), PipelineError> {
        let mut out = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut out, row).map_err(|e| PipelineError::Artifact(e.to_string()))?;
            out.push(b'\n');
        }
        self.write(rel, &out)
    }

    pub fn read_csv<T: DeserializeOwned>(&mut self, rel: &str, producer: Stage) -> Result<Vec<T>, PipelineError> {
        let bytes = self.read(rel, producer)?;
        csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<Result<Vec<T>, _>>()
            .map_err(|e| PipelineError::Artifact(format!("{rel}: {e}")))
    }

    pub fn read_jsonl<T: DeserializeOwned>(&mut self, rel: &str, producer: Stage) -> Result<Vec<T>, PipelineError> {
        let bytes = self.read(rel, producer)?;
        let text = String::from_utf8(bytes).map_err(|e| PipelineError::Artifact(format!("{rel}: {e}")))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| PipelineError::Artifact(format!("{rel} line {}: {e}", i + 1)))
            })
            .collect()
    }

    /// Close the stage: replace its manifest entries and save the manifest.
    pub fn finish(&mut self) -> Result<(), PipelineError> {
        let log = self.current.take().expect("begin() before finish()");
        let seed = self.stage_seed(log.stage);
        self.manifest.artifacts.retain(|_, e| e.stage != log.stage);
        for (key, sha256) in log.outputs {
            self.manifest.artifacts.insert(
                key,
                ArtifactEntry {
                    stage: log.stage,
                    sha256,
                    seed,
                    config_hash: self.config_hash.clone(),
                    inputs: log.inputs.clone(),
                },
            );
        }
        self.manifest.root_seed = self.root_seed;
        self.manifest.config_hash = self.config_hash.clone();
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(self.root.join(MANIFEST), bytes)?;
        Ok(())
    }
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| PipelineError::Artifact(e.to_string()))?;
    }
    w.into_inner().map_err(|e| PipelineError::Artifact(e.to_string()))
}
