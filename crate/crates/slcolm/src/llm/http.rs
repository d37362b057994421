//! OpenAI-compatible chat-completions client over HTTP.
//!
//! One user message per request (the prompt is a single monolithic block),
//! temperature 0 by default, retries with exponential backoff and jitter.
//! Rate limiting is surfaced distinctly so callers can slow down.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::llm::LlmBackend;
use crate::prompt::PromptBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer key; `None` for
    /// unauthenticated endpoints.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    /// Base backoff in milliseconds; doubled per attempt plus jitter.
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
}

fn default_max_retries() -> u32 {
    3
}
fn default_timeout_secs() -> u64 {
    30
}
fn default_max_concurrent() -> usize {
    4
}
fn default_retry_base_ms() -> u64 {
    500
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpBackendConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            temperature: 0.0,
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            max_concurrent: default_max_concurrent(),
            retry_base_ms: default_retry_base_ms(),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
    requests: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        if config.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            config,
            agent,
            requests: AtomicU64::new(0),
        })
    }

    fn api_key(&self) -> Result<Option<String>> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::AuthMissing(var.clone())),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.retry_base_ms << attempt.min(8);
        let jitter = rand::thread_rng().gen_range(0..=self.config.retry_base_ms / 2 + 1);
        Duration::from_millis(base + jitter)
    }

    fn request_once(&self, body: &str, key: Option<&str>) -> Result<(u16, String)> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json");
        if let Some(key) = key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = req
            .send(body)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok((status, text))
    }
}

fn extract_content(body: &str) -> Result<String> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| Error::BadResponse(e.to_string()))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(|s| s.to_string())
        .ok_or_else(|| Error::BadResponse("missing choices[0].message.content".into()))
}

impl LlmBackend for HttpBackend {
    fn model_name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        let key = self.api_key()?;
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": self.config.temperature,
        })
        .to_string();

        let mut rate_limited = false;
        let mut last_err: Option<Error> = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            match self.request_once(&body, key.as_deref()) {
                Ok((200, text)) => return extract_content(&text),
                Ok((429, _)) => {
                    rate_limited = true;
                    last_err = None;
                }
                Ok((status, text)) if (500..600).contains(&status) => {
                    rate_limited = false;
                    last_err = Some(Error::Transport(format!("status {status}: {text}")));
                }
                Ok((status, text)) => {
                    // Other 4xx are not retryable.
                    return Err(Error::Transport(format!("status {status}: {text}")));
                }
                Err(e) => {
                    rate_limited = false;
                    last_err = Some(e);
                }
            }
        }
        if rate_limited {
            return Err(Error::RateLimited {
                attempts: self.config.max_retries + 1,
            });
        }
        Err(last_err.unwrap_or_else(|| Error::Transport("retries exhausted".into())))
    }

    fn network_requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }
}
