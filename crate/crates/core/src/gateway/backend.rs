use super::{GenerationConfig, PromptBundle};
use serde_json::json;
use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

/// Line that separates records in a completion fixture.
pub const FIXTURE_DELIMITER: &str = "### completion";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, 5xx and 429.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Backend: Send {
    fn complete(
        &mut self,
        bundle: &PromptBundle,
        config: &GenerationConfig,
    ) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(
        &mut self,
        bundle: &PromptBundle,
        config: &GenerationConfig,
    ) -> Result<String, BackendError> {
        (**self).complete(bundle, config)
    }
}

/// Returns canned completions in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: VecDeque<String>,
    seen: Vec<PromptBundle>,
}

impl ScriptedBackend {
    pub fn new<I, S>(completions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            script: completions.into_iter().map(Into::into).collect(),
            seen: Vec::new(),
        }
    }

    /// Parses fixture text: records start after each delimiter line, and
    /// text before the first delimiter is ignored.
    pub fn parse_fixture(text: &str) -> Vec<String> {
        let mut records = Vec::new();
        let mut current: Option<Vec<&str>> = None;
        for line in text.lines() {
            if line.trim_end() == FIXTURE_DELIMITER {
                if let Some(lines) = current.take() {
                    records.push(lines.join("\n").trim().to_string());
                }
                current = Some(Vec::new());
            } else if let Some(lines) = current.as_mut() {
                lines.push(line);
            }
        }
        if let Some(lines) = current {
            records.push(lines.join("\n").trim().to_string());
        }
        records
    }

    pub fn render_fixture<S: AsRef<str>>(completions: &[S]) -> String {
        let mut out = String::new();
        for c in completions {
            out.push_str(FIXTURE_DELIMITER);
            out.push('\n');
            out.push_str(c.as_ref());
            out.push('\n');
        }
        out
    }

    pub fn from_fixture(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(Self::parse_fixture(&text)))
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }

    /// Bundles received so far, oldest first.
    pub fn seen(&self) -> &[PromptBundle] {
        &self.seen
    }
}

impl Backend for ScriptedBackend {
    fn complete(
        &mut self,
        bundle: &PromptBundle,
        _config: &GenerationConfig,
    ) -> Result<String, BackendError> {
        self.seen.push(bundle.clone());
        self.script
            .pop_front()
            .ok_or_else(|| BackendError::Unavailable("completion script exhausted".into()))
    }
}

/// Wraps a backend and keeps every completion it returns, so a live run can
/// be saved as a replay fixture.
pub struct RecordingBackend<B> {
    inner: B,
    captured: Vec<String>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            captured: Vec::new(),
        }
    }

    pub fn captured(&self) -> &[String] {
        &self.captured
    }

    pub fn into_inner(self) -> (B, Vec<String>) {
        (self.inner, self.captured)
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(
        &mut self,
        bundle: &PromptBundle,
        config: &GenerationConfig,
    ) -> Result<String, BackendError> {
        let out = self.inner.complete(bundle, config)?;
        self.captured.push(out.clone());
        Ok(out)
    }
}

/// OpenAI-style chat-completion client.
pub struct LiveBackend {
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Backend for LiveBackend {
    fn complete(
        &mut self,
        bundle: &PromptBundle,
        config: &GenerationConfig,
    ) -> Result<String, BackendError> {
        let token = std::env::var(&config.auth_token_env_var).map_err(|_| {
            BackendError::Unavailable(format!("{} is not set", config.auth_token_env_var))
        })?;
        let body = json!({
            "model": config.model_id,
            "messages": [{"role": "user", "content": bundle.render()}],
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        });
        let resp = self
            .client
            .post(&config.endpoint)
            .bearer_auth(token)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Unavailable(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| BackendError::Transport(format!("malformed response body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Unavailable("response has no message content".into()))
    }
}
