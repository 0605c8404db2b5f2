//! Chat-completion client.
//!
//! One wire format is supported: an OpenAI-style `POST
//! {base_url}/chat/completions` with a JSON body
//!
//! ```json
//! {"model": "...", "messages": [{"role": "system", "content": "..."},
//!   {"role": "user", "content": "..." | [{"type": "text", "text": "..."},
//!     {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}],
//!  "max_tokens": 1024, "temperature": 0.0, "seed": 42}
//! ```
//!
//! and a reply whose `choices[0].message.content` holds the answer text
//! (`usage` is optional). Text-only prompts send the user content as one
//! string.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{Block, Content, Prompt};

fn default_timeout() -> f64 {
    60.0
}
fn default_parallelism() -> usize {
    4
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, initial_backoff_ms: 500, max_backoff_ms: 8000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): doubling, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    pub name: String,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key. `None` sends no
    /// credentials, which suits local servers.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Requests per minute; `None` means unlimited.
    #[serde(default)]
    pub rate_limit_per_minute: Option<u32>,
    #[serde(default = "default_true")]
    pub supports_images: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl ModelEndpoint {
    pub fn new(name: &str, base_url: &str, model: &str) -> Self {
        ModelEndpoint {
            name: name.to_string(),
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            rate_limit_per_minute: None,
            supports_images: true,
            parallelism: default_parallelism(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("endpoint name is empty".into());
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(format!("endpoint '{}': timeout_secs must be > 0", self.name));
        }
        if self.parallelism == 0 {
            return Err(format!("endpoint '{}': parallelism must be >= 1", self.name));
        }
        if self.rate_limit_per_minute == Some(0) {
            return Err(format!("endpoint '{}': rate_limit_per_minute must be >= 1", self.name));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(format!("endpoint '{}': base_url must start with http:// or https://", self.name));
        }
        Ok(())
    }

    /// Resolves the API key from the environment.
    pub fn credentials(&self) -> Result<Option<String>, QueryError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(QueryError::Credentials(var.clone())),
            },
        }
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
    #[serde(default)]
    pub total_tokens: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency_ms: u64,
    pub endpoint: String,
    pub model: String,
    pub retries: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum QueryError {
    #[error("credential variable '{0}' is not set")]
    Credentials(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("endpoint '{0}' does not accept images")]
    Capability(String),
}

impl QueryError {
    fn transient(&self) -> bool {
        match self {
            QueryError::Timeout | QueryError::Transport(_) => true,
            QueryError::Status(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// A failed query with the number of retries spent on it.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{error} (after {retries} retries)")]
pub struct QueryFailure {
    pub error: QueryError,
    pub retries: u32,
}

/// Spaces request starts at least `interval` apart across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(limit: Option<u32>) -> Self {
        let interval = limit.map_or(Duration::ZERO, |n| Duration::from_secs_f64(60.0 / n as f64));
        RateLimiter { interval, next: Mutex::new(None) }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until this caller's slot.
    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// Builds the request body for `prompt`.
pub fn request_body(model: &str, prompt: &Prompt) -> Value {
    let system: Vec<&str> = prompt
        .parts
        .iter()
        .filter(|p| p.block == Block::Instructions)
        .filter_map(|p| match &p.content {
            Content::Text(t) => Some(t.as_str()),
            Content::Image(_) => None,
        })
        .collect();
    let user_parts: Vec<&Content> = prompt.parts.iter().filter(|p| p.block != Block::Instructions).map(|p| &p.content).collect();
    let user = if prompt.has_images() {
        Value::Array(
            user_parts
                .iter()
                .map(|c| match c {
                    Content::Text(t) => json!({"type": "text", "text": t}),
                    Content::Image(png) => json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(png))}
                    }),
                })
                .collect(),
        )
    } else {
        let texts: Vec<&str> = user_parts
            .iter()
            .filter_map(|c| match c {
                Content::Text(t) => Some(t.as_str()),
                Content::Image(_) => None,
            })
            .collect();
        Value::String(texts.join("\n\n"))
    };
    let mut body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": system.join("\n\n")},
            {"role": "user", "content": user},
        ],
        "max_tokens": prompt.params.max_tokens,
        "temperature": prompt.params.temperature,
    });
    if let Some(seed) = prompt.params.seed {
        body["seed"] = json!(seed);
    }
    body
}

/// Extracts the answer text and usage from a reply body.
pub fn parse_reply(body: &str) -> Result<(String, Option<Usage>), QueryError> {
    let v: Value = serde_json::from_str(body).map_err(|e| QueryError::Malformed(e.to_string()))?;
    let message = v
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| QueryError::Malformed("missing choices[0].message".into()))?;
    let text = match message.get("content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(Value::Array(parts)) => parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect::<Vec<_>>().join(""),
        Some(other) => return Err(QueryError::Malformed(format!("unexpected content {other}"))),
    };
    let usage = v.get("usage").and_then(|u| serde_json::from_value(u.clone()).ok());
    Ok((text, usage))
}

/// A client bound to one endpoint, shared across worker threads.
pub struct EndpointClient {
    endpoint: ModelEndpoint,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl EndpointClient {
    pub fn new(endpoint: ModelEndpoint) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = RateLimiter::per_minute(endpoint.rate_limit_per_minute);
        EndpointClient { endpoint, agent, limiter }
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn attempt(&self, body: &[u8], key: Option<&str>) -> Result<(String, Option<Usage>), QueryError> {
        self.limiter.acquire();
        let mut req = self.agent.post(&self.endpoint.url()).header("Content-Type", "application/json");
        if let Some(k) = key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => QueryError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => QueryError::Timeout,
            other => QueryError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => QueryError::Timeout,
            other => QueryError::Transport(other.to_string()),
        })?;
        match status {
            200..=299 => parse_reply(&text),
            401 | 403 => Err(QueryError::Auth(status)),
            _ => Err(QueryError::Status(status)),
        }
    }

    /// Sends `prompt`, retrying transient failures with backoff.
    pub fn query(&self, prompt: &Prompt) -> Result<RawResponse, QueryFailure> {
        if prompt.has_images() && !self.endpoint.supports_images {
            return Err(QueryFailure { error: QueryError::Capability(self.endpoint.name.clone()), retries: 0 });
        }
        let key = self.endpoint.credentials().map_err(|error| QueryFailure { error, retries: 0 })?;
        let body = serde_json::to_vec(&request_body(&self.endpoint.model, prompt)).expect("request serializes");
        let start = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(&body, key.as_deref()) {
                Ok((text, usage)) => {
                    return Ok(RawResponse {
                        text,
                        usage,
                        latency_ms: start.elapsed().as_millis() as u64,
                        endpoint: self.endpoint.name.clone(),
                        model: self.endpoint.model.clone(),
                        retries,
                    })
                }
                Err(e) if e.transient() && retries < self.endpoint.retry.max_retries => {
                    retries += 1;
                    thread::sleep(self.endpoint.retry.backoff(retries));
                }
                Err(error) => return Err(QueryFailure { error, retries }),
            }
        }
    }
}

/// One-shot convenience wrapper around [`EndpointClient::query`].
pub fn query_model(endpoint: &ModelEndpoint, prompt: &Prompt) -> Result<RawResponse, QueryFailure> {
    EndpointClient::new(endpoint.clone()).query(prompt)
}
