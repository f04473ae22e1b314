use std::thread;
use std::time::Duration;

use super::GatewayError;

/// Exponential backoff over a bounded number of attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first one.
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; no delay before the first
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = 1u32 << (attempt - 2).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

fn retryable(status: u16) -> bool {
    matches!(status, 408 | 425 | 429) || (500..600).contains(&status)
}

pub(crate) struct HttpPoster {
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpPoster {
    pub(crate) fn new(retry: RetryPolicy, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpPoster { agent, retry }
    }

    /// POSTs a JSON body, retrying transport failures and retryable statuses.
    pub(crate) fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        key: &str,
    ) -> Result<String, GatewayError> {
        let attempts = self.retry.attempts.max(1);
        let mut last_failure = String::new();
        let mut last_status = None;
        for attempt in 1..=attempts {
            thread::sleep(self.retry.delay_before(attempt));
            let mut request = self.agent.post(url).set("Content-Type", "application/json");
            for (name, value) in headers {
                request = request.set(name, value);
            }
            match request.send_string(body) {
                Ok(response) => {
                    return response.into_string().map_err(|e| GatewayError::Malformed {
                        key: key.to_owned(),
                        message: format!("unreadable body: {e}"),
                    })
                }
                Err(ureq::Error::Status(status, response)) => {
                    let text = response.into_string().unwrap_or_default();
                    if !retryable(status) {
                        return Err(GatewayError::Status {
                            key: key.to_owned(),
                            status,
                            body: text,
                        });
                    }
                    last_status = Some(status);
                    last_failure = format!("HTTP {status}: {text}");
                }
                Err(ureq::Error::Transport(t)) => {
                    last_status = None;
                    last_failure = t.to_string();
                }
            }
        }
        match last_status {
            Some(status) => Err(GatewayError::RetryExhausted {
                key: key.to_owned(),
                attempts,
                status,
                message: last_failure,
            }),
            None => Err(GatewayError::Transport {
                key: key.to_owned(),
                attempts,
                message: last_failure,
            }),
        }
    }
}
