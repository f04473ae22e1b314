//! Optional external machine-translation path.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::LanguageCode;
use crate::gateway::{GatewayError, HttpPoster, RetryPolicy};
use crate::hash::sha256_hex;

/// MT endpoint settings. The endpoint takes `{text, source, target}` and
/// answers `{translation}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtConfig {
    pub endpoint_url: String,
    /// Header carrying the API key, e.g. `Authorization` or `X-Api-Key`.
    #[serde(default)]
    pub auth_header: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

impl MtConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        MtConfig {
            endpoint_url: endpoint_url.into(),
            auth_header: None,
            api_key_env: None,
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub source_language: LanguageCode,
    pub target_language: LanguageCode,
    pub source: String,
    pub target: String,
}

pub struct MtClient {
    http: HttpPoster,
    url: String,
    headers: Vec<(String, String)>,
    log: Mutex<Vec<TranslationPair>>,
}

impl MtClient {
    pub fn new(config: &MtConfig) -> Result<Self, GatewayError> {
        let key = crate::gateway::read_api_key(config.api_key_env.as_deref())?;
        let headers = match key {
            None => Vec::new(),
            Some(key) => {
                let header = config
                    .auth_header
                    .clone()
                    .unwrap_or_else(|| "Authorization".to_owned());
                let value = if header.eq_ignore_ascii_case("authorization") {
                    format!("Bearer {key}")
                } else {
                    key
                };
                vec![(header, value)]
            }
        };
        let retry = RetryPolicy {
            attempts: config.retries.max(1),
            base_delay: Duration::from_millis(config.backoff_ms),
            ..RetryPolicy::default()
        };
        Ok(MtClient {
            http: HttpPoster::new(retry, Duration::from_secs(60)),
            url: config.endpoint_url.clone(),
            headers,
            log: Mutex::new(Vec::new()),
        })
    }

    /// Translates `text` and records the pair for later quality checks.
    pub fn translate_external(
        &self,
        text: &str,
        source: &LanguageCode,
        target: &LanguageCode,
    ) -> Result<String, GatewayError> {
        if source == target {
            return Err(GatewayError::Precondition(format!(
                "source and target language are both `{source}`"
            )));
        }
        if text.is_empty() {
            return Err(GatewayError::Precondition("nothing to translate".into()));
        }
        let body = json!({"text": text, "source": source, "target": target}).to_string();
        let key = sha256_hex(format!("{}\0{body}", self.url).as_bytes());
        let raw = self.http.post_json(&self.url, &self.headers, &body, &key)?;
        let translation = serde_json::from_str::<serde_json::Value>(&raw)
            .ok()
            .and_then(|v| {
                v.get("translation")
                    .and_then(|t| t.as_str())
                    .map(str::to_owned)
            })
            .ok_or_else(|| GatewayError::Malformed {
                key: key.clone(),
                message: "missing `translation` field".into(),
            })?;
        if translation.trim().is_empty() {
            return Err(GatewayError::Malformed {
                key,
                message: "empty translation".into(),
            });
        }
        self.log
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(TranslationPair {
                source_language: source.clone(),
                target_language: target.clone(),
                source: text.to_owned(),
                target: translation.clone(),
            });
        Ok(translation)
    }

    /// Every successful translation so far, in call order.
    pub fn translations(&self) -> Vec<TranslationPair> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}
