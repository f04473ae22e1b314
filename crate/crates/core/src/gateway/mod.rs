//! Client for chat-completions and embeddings endpoints.
//!
//! All network access of the toolkit goes through [`Gateway`]: requests are
//! keyed by content, answered from a persistent cache when possible, retried
//! with exponential backoff otherwise, and capped at a fixed number in flight.

mod cache;
mod http;

pub use cache::ResponseCache;
pub(crate) use http::HttpPoster;
pub use http::RetryPolicy;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::hash::sha256_hex;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("environment variable `{var}` holding the API key is not set")]
    MissingApiKey { var: String },
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("request {key}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        key: String,
        attempts: u32,
        message: String,
    },
    #[error("request {key}: retries exhausted after {attempts} attempt(s), last status {status}: {message}")]
    RetryExhausted {
        key: String,
        attempts: u32,
        status: u16,
        message: String,
    },
    #[error("request {key}: endpoint answered HTTP {status}: {body}")]
    Status {
        key: String,
        status: u16,
        body: String,
    },
    #[error("request {key}: malformed response: {message}")]
    Malformed { key: String, message: String },
    #[error("request {key}: protocol violation: {message}")]
    Protocol { key: String, message: String },
    #[error("response cache {path}: {message}")]
    Cache { path: String, message: String },
}

impl GatewayError {
    /// Cache key of the failing request, when there is one.
    pub fn request_key(&self) -> Option<&str> {
        match self {
            GatewayError::Transport { key, .. }
            | GatewayError::RetryExhausted { key, .. }
            | GatewayError::Status { key, .. }
            | GatewayError::Malformed { key, .. }
            | GatewayError::Protocol { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            temperature: 0.0,
            max_new_tokens: 10,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::Precondition(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::Precondition(
                "max_new_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Connection settings for one endpoint, as found in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Total attempts per request.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub decoding: DecodingConfig,
}

fn default_parallelism() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    60
}

impl GatewayConfig {
    pub fn new(endpoint_url: impl Into<String>, model: impl Into<String>) -> Self {
        GatewayConfig {
            endpoint_url: endpoint_url.into(),
            model: model.into(),
            api_key_env: None,
            parallelism: default_parallelism(),
            retries: default_retries(),
            cache_dir: None,
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
            decoding: DecodingConfig::default(),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.retries.max(1),
            base_delay: Duration::from_millis(self.backoff_ms),
            ..RetryPolicy::default()
        }
    }

    /// Builds a gateway, reading the API key from the configured variable.
    pub fn connect(&self) -> Result<Gateway, GatewayError> {
        let api_key = read_api_key(self.api_key_env.as_deref())?;
        self.decoding.validate()?;
        let cache = match &self.cache_dir {
            Some(dir) => Some(ResponseCache::open(dir).map_err(|e| GatewayError::Cache {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?),
            None => None,
        };
        Ok(Gateway::new(
            api_key,
            self.parallelism,
            self.retry_policy(),
            Duration::from_secs(self.timeout_secs),
            cache,
        ))
    }

    pub fn chat_request(&self, prompt: impl Into<String>) -> ChatRequest {
        ChatRequest {
            endpoint: self.endpoint_url.clone(),
            model: self.model.clone(),
            prompt: prompt.into(),
            decoding: self.decoding,
        }
    }
}

pub(crate) fn read_api_key(var: Option<&str>) -> Result<Option<String>, GatewayError> {
    match var {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .ok()
            .filter(|v| !v.is_empty())
            .map(Some)
            .ok_or_else(|| GatewayError::MissingApiKey {
                var: var.to_owned(),
            }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub endpoint: String,
    pub model: String,
    pub prompt: String,
    pub decoding: DecodingConfig,
}

impl ChatRequest {
    /// SHA-256 over a canonical JSON rendering of every request field.
    pub fn cache_key(&self) -> String {
        let canonical = json!({
            "kind": "chat",
            "endpoint": self.endpoint,
            "model": self.model,
            "prompt": self.prompt,
            "temperature": self.decoding.temperature,
            "max_new_tokens": self.decoding.max_new_tokens,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }

    fn body(&self) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt}],
            "temperature": self.decoding.temperature,
            "max_tokens": self.decoding.max_new_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRequest {
    pub endpoint: String,
    pub model: String,
    pub inputs: Vec<String>,
}

impl EmbeddingRequest {
    pub fn cache_key(&self) -> String {
        let canonical = json!({
            "kind": "embeddings",
            "endpoint": self.endpoint,
            "model": self.model,
            "inputs": self.inputs,
        });
        sha256_hex(canonical.to_string().as_bytes())
    }
}

fn join_path(endpoint: &str, path: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_owned()
    } else if base.ends_with("/v1") {
        format!("{base}{path}")
    } else {
        format!("{base}/v1{path}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub vectors: Vec<Vec<f64>>,
    pub from_cache: bool,
}

struct Slots {
    free: Mutex<usize>,
    released: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

/// Thread-safe, cache-backed client. Share one instance across workers.
pub struct Gateway {
    http: HttpPoster,
    api_key: Option<String>,
    cache: Option<ResponseCache>,
    slots: Slots,
    parallelism: usize,
    network_requests: AtomicU64,
}

impl Gateway {
    pub fn new(
        api_key: Option<String>,
        parallelism: usize,
        retry: RetryPolicy,
        timeout: Duration,
        cache: Option<ResponseCache>,
    ) -> Self {
        Gateway {
            http: HttpPoster::new(retry, timeout),
            api_key,
            cache,
            slots: Slots::new(parallelism),
            parallelism: parallelism.max(1),
            network_requests: AtomicU64::new(0),
        }
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    /// Number of requests that went to the network (cache misses).
    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::Relaxed)
    }

    fn headers(&self) -> Vec<(String, String)> {
        self.api_key
            .iter()
            .map(|k| ("Authorization".to_owned(), format!("Bearer {k}")))
            .collect()
    }

    fn cached(&self, key: &str) -> Result<Option<String>, GatewayError> {
        match &self.cache {
            None => Ok(None),
            Some(cache) => cache.get(key).map_err(|e| GatewayError::Cache {
                path: cache.dir().display().to_string(),
                message: e.to_string(),
            }),
        }
    }

    fn fetch(&self, url: &str, body: &Value, key: &str) -> Result<String, GatewayError> {
        let _slot = self.slots.acquire();
        self.network_requests.fetch_add(1, Ordering::Relaxed);
        self.http
            .post_json(url, &self.headers(), &body.to_string(), key)
    }

    fn store(&self, key: &str, body: &str) -> Result<(), GatewayError> {
        if let Some(cache) = &self.cache {
            cache.put(key, body).map_err(|e| GatewayError::Cache {
                path: cache.dir().display().to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// First message content of the completion for `request`.
    pub fn chat_complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        if let Some(hit) = self.cached_chat(request)? {
            return Ok(hit);
        }
        let key = request.cache_key();
        let raw = self.fetch(
            &join_path(&request.endpoint, "/chat/completions"),
            &request.body(),
            &key,
        )?;
        let text = parse_chat_body(&raw, &key)?;
        self.store(&key, &raw)?;
        Ok(Completion {
            text,
            from_cache: false,
        })
    }

    /// Cache-only lookup; never touches the network.
    pub fn cached_chat(&self, request: &ChatRequest) -> Result<Option<Completion>, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::Precondition("prompt is empty".into()));
        }
        request.decoding.validate()?;
        let key = request.cache_key();
        match self.cached(&key)? {
            Some(raw) => Ok(Some(Completion {
                text: parse_chat_body(&raw, &key)?,
                from_cache: true,
            })),
            None => Ok(None),
        }
    }

    /// One vector per input, all of the same dimension.
    pub fn embed_batch(&self, request: &EmbeddingRequest) -> Result<Embeddings, GatewayError> {
        if request.inputs.is_empty() {
            return Err(GatewayError::Precondition("no inputs to embed".into()));
        }
        if let Some(i) = request.inputs.iter().position(|s| s.is_empty()) {
            return Err(GatewayError::Precondition(format!("input {i} is empty")));
        }
        let key = request.cache_key();
        if let Some(raw) = self.cached(&key)? {
            return Ok(Embeddings {
                vectors: parse_embedding_body(&raw, request.inputs.len(), &key)?,
                from_cache: true,
            });
        }
        let body = json!({"model": request.model, "input": request.inputs});
        let raw = self.fetch(&join_path(&request.endpoint, "/embeddings"), &body, &key)?;
        let vectors = parse_embedding_body(&raw, request.inputs.len(), &key)?;
        self.store(&key, &raw)?;
        Ok(Embeddings {
            vectors,
            from_cache: false,
        })
    }
}

fn parse_chat_body(raw: &str, key: &str) -> Result<String, GatewayError> {
    let malformed = |message: String| GatewayError::Malformed {
        key: key.to_owned(),
        message,
    };
    let value: Value = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| malformed("missing choices[0].message.content".into()))
}

fn parse_embedding_body(
    raw: &str,
    expected: usize,
    key: &str,
) -> Result<Vec<Vec<f64>>, GatewayError> {
    let malformed = |message: String| GatewayError::Malformed {
        key: key.to_owned(),
        message,
    };
    let value: Value = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
    let data = value
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing data array".into()))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map(|i| i as usize)
            .unwrap_or(pos);
        let vector = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(format!("data[{pos}] has no embedding")))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| malformed(format!("data[{pos}] has a non-numeric component")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((index, vector));
    }
    rows.sort_by_key(|(i, _)| *i);
    let protocol = |message: String| GatewayError::Protocol {
        key: key.to_owned(),
        message,
    };
    if rows.len() != expected || rows.iter().enumerate().any(|(i, (idx, _))| i != *idx) {
        return Err(protocol(format!(
            "expected {expected} embeddings indexed 0..{expected}, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].1.len();
    if dim == 0 {
        return Err(protocol("zero-dimensional embedding".into()));
    }
    if let Some((i, v)) = rows.iter().find(|(_, v)| v.len() != dim) {
        return Err(protocol(format!(
            "dimension mismatch in batch: input 0 has {dim}, input {i} has {}",
            v.len()
        )));
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

/// Anything that turns texts into vectors.
pub trait Embedder {
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
}

/// [`Embedder`] backed by an embeddings endpoint.
pub struct EmbeddingClient<'a> {
    pub gateway: &'a Gateway,
    pub endpoint: String,
    pub model: String,
}

impl Embedder for EmbeddingClient<'_> {
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let request = EmbeddingRequest {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            inputs: inputs.to_vec(),
        };
        Ok(self.gateway.embed_batch(&request)?.vectors)
    }
}
