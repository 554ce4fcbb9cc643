//! Minimal chat-completions client.
//!
//! Request: `POST {base_url}/chat/completions` with body
//! `{"model", "messages": [{"role": "system", ...}, {"role": "user", ...}], "temperature"}`
//! and, when a key is available, `Authorization: Bearer <key>`.
//! Reply: the text at `choices[0].message.content`.
//!
//! The key is only ever read from an environment variable.

use std::time::Duration;

use emodist::sampler::{BackendError, ChatBackend, ChatRequest};
use serde_json::{json, Value};

/// Longest error body kept in a `BackendError::Status`.
const BODY_SNIPPET: usize = 512;

pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_model: Option<String>,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_model: Option<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_model,
            api_key,
        }
    }

    /// Same as [`HttpBackend::new`] with the key taken from `key_var`.
    pub fn from_env(base_url: &str, api_model: Option<String>, key_var: &str, timeout: Duration) -> Self {
        let key = std::env::var(key_var).ok().filter(|k| !k.is_empty());
        if key.is_none() {
            log::warn!("{key_var} is not set; sending requests without an Authorization header");
        }
        Self::new(base_url, api_model, key, timeout)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

pub fn request_body(model: &str, request: &ChatRequest) -> Value {
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ],
        "temperature": request.temperature,
    })
}

pub fn reply_text(body: &str) -> Result<String, BackendError> {
    let value: Value = serde_json::from_str(body).map_err(|e| BackendError::Reply(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Reply("no choices[0].message.content string".into()))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let model = self.api_model.as_deref().unwrap_or(&request.model);
        let body = request_body(model, request).to_string();
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send(body.as_bytes()).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let mut body: String = text.chars().take(BODY_SNIPPET).collect();
            if body.len() < text.len() {
                body.push('…');
            }
            return Err(BackendError::Status { status, body });
        }
        reply_text(&text)
    }
}
