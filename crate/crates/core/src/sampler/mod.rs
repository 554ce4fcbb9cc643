//! Collecting LLM annotation samples: prompts, parsing, backends, storage.

pub mod backend;
pub mod collect;
pub mod parse;
pub mod prompt;
pub mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{BackendError, ChatBackend, ChatRequest, MockBackend, Planted};
pub use collect::{collect, RunSummary};
pub use parse::{parse_bytes, parse_response, FailureReason, ParsedResponse};
pub use prompt::{render_prompt, Prompt};
pub use store::{StoreRecord, StoredParsed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Categorical,
    Vad,
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store line {line}: {message}")]
    StoreLine { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub temperatures: Vec<f64>,
    pub samples_per_temperature: u32,
    /// Extra attempts after a backend error.
    pub max_retries: u32,
    /// Maximum requests in flight.
    pub concurrency_limit: usize,
    pub record_timestamps: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperatures: vec![0.0, 0.3, 0.7, 1.0],
            samples_per_temperature: 10,
            max_retries: 3,
            concurrency_limit: 4,
            record_timestamps: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.temperatures.is_empty() {
            return Err(SamplerError::Config("no temperatures".into()));
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(SamplerError::Config(format!("temperature {t} is negative or not finite")));
        }
        if self.samples_per_temperature < 1 {
            return Err(SamplerError::Config("samples_per_temperature must be at least 1".into()));
        }
        Ok(())
    }

    pub fn responses_per_text(&self) -> usize {
        self.temperatures.len() * self.samples_per_temperature as usize
    }
}
