//! Pipeline driver behind the `emodist` binary.
//!
//! Stages run in a fixed order and talk only through files in the output
//! directory, so each can be re-run on its own:
//!
//! | stage          | reads                                   | writes                        |
//! |----------------|-----------------------------------------|-------------------------------|
//! | `ingest`       | corpora, external CSVs                  | `ingest/`                     |
//! | `sample`       | `ingest/`                               | response stores               |
//! | `dists`        | `ingest/`, response stores              | `dists/`                      |
//! | `evaluate`     | `dists/`                                | `evaluate/`                   |
//! | `transparency` | `ingest/`, `evaluate/`, embeddings, lexicon | `transparency/`           |
//! | `calibrate`    | `dists/`                                | `calibrate/`                  |
//! | `stats`        | `evaluate/`, `calibrate/`               | `stats/`                      |
//! | `report`       | everything above                        | `report/`                     |
//!
//! `manifest.json` records the SHA-256, stage seed, config hash and input
//! hashes of every artifact.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod config;
pub mod demo;
pub mod external;
pub mod http;
mod stages;
pub mod workspace;

pub use config::PipelineConfig;
pub use external::{ingest_external_distributions, ExternalDistributions};
pub use stages::run_pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Sample,
    Dists,
    Evaluate,
    Transparency,
    Calibrate,
    Stats,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Sample,
        Stage::Dists,
        Stage::Evaluate,
        Stage::Transparency,
        Stage::Calibrate,
        Stage::Stats,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::Dists => "dists",
            Stage::Evaluate => "evaluate",
            Stage::Transparency => "transparency",
            Stage::Calibrate => "calibrate",
            Stage::Stats => "stats",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown stage {s:?}")))
    }
}

/// Comma-separated stage list; `all` selects every stage and an empty
/// string selects none.
pub fn parse_stages(list: &str) -> Result<BTreeSet<Stage>, PipelineError> {
    let mut out = BTreeSet::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if part == "all" {
            out.extend(Stage::ALL);
        } else {
            out.insert(part.parse()?);
        }
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {path}; run the `{stage}` stage first")]
    MissingArtifact { path: String, stage: Stage },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("{stage}: {message}")]
    Stage { stage: Stage, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub(crate) fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        PipelineError::Stage { stage, message: err.to_string() }
    }
}

/// Knobs that come from the command line rather than the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides every HTTP model's `base_url`.
    pub base_url: Option<String>,
}
