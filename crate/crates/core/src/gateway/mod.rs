//! Prompt construction, generation backends, and decision parsing.

mod backend;
mod decision;
mod prompt;

pub use backend::{
    Backend, BackendError, LiveBackend, RecordingBackend, ScriptedBackend, FIXTURE_DELIMITER,
};
pub use decision::{parse_decision, AgentDecision};
pub use prompt::{
    build_prompt, BudgetExceeded, ErrorFeedback, PromptBundle, PromptInputs, PromptMode,
    DEFAULT_PROMPT_BUDGET, MAX_CONTEXT_ITEMS, MAX_HISTORY_SNIPPETS,
};

use crate::transcript::{Channel, Transcript};
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

pub const DEFAULT_AUTH_TOKEN_VAR: &str = "OPENAI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenerationConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub endpoint: String,
    pub auth_token_env_var: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4.1".into(),
            temperature: 0.0,
            max_output_tokens: 512,
            endpoint: DEFAULT_ENDPOINT.into(),
            auth_token_env_var: DEFAULT_AUTH_TOKEN_VAR.into(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_output_tokens == 0 {
            return Err("max-output-tokens must be positive".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("invalid temperature {}", self.temperature));
        }
        if self.model_id.is_empty() {
            return Err("model id is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend returned an empty completion")]
    EmptyCompletion,
}

/// Delays between successive retries of a transport error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: [1, 2, 4].into_iter().map(Duration::from_secs).collect(),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { delays: Vec::new() }
    }
}

/// Asks the backend for one completion and parses it.
pub fn decide_next<B: Backend + ?Sized>(
    bundle: &PromptBundle,
    config: &GenerationConfig,
    backend: &mut B,
    retry: &RetryPolicy,
    transcript: &Transcript,
) -> Result<(AgentDecision, String), GatewayError> {
    let mut attempt = 0;
    let raw = loop {
        match backend.complete(bundle, config) {
            Ok(raw) => break raw,
            Err(BackendError::Transport(msg)) => match retry.delays.get(attempt) {
                Some(delay) => {
                    std::thread::sleep(*delay);
                    attempt += 1;
                }
                None => return Err(GatewayError::BackendUnavailable(msg)),
            },
            Err(BackendError::Unavailable(msg)) => {
                return Err(GatewayError::BackendUnavailable(msg))
            }
        }
    };
    transcript.log(Channel::Completion, &raw);
    if raw.trim().is_empty() {
        return Err(GatewayError::EmptyCompletion);
    }
    Ok((parse_decision(&raw), raw))
}
