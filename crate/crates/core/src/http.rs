//! Minimal JSON-over-HTTP transport used by the encyclopedia client and the
//! sidecar client.

use std::time::Duration;

use serde_json::Value;

const USER_AGENT: &str = concat!("newsstake/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Connection refused, DNS failure, timeout, reset.
    Connect(String),
    /// The server answered with a non-2xx status.
    Status { code: u16, body: String },
    /// The body was not the JSON we asked for.
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Connect(_) => true,
            TransportError::Status { code, .. } => *code >= 500 || *code == 429,
            TransportError::Decode(_) => false,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Connect(m) => write!(f, "connection failed: {m}"),
            TransportError::Status { code, body } => write!(f, "HTTP {code}: {body}"),
            TransportError::Decode(m) => write!(f, "malformed response: {m}"),
        }
    }
}

pub trait Transport: Send + Sync {
    fn get_json(&self, url: &str) -> Result<Value, TransportError>;
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError>;
}

/// Blocking transport over `ureq`.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
        }
    }

    fn finish(
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Value, TransportError> {
        let mut response = result.map_err(|e| TransportError::Connect(e.to_string()))?;
        let code = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Connect(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(TransportError::Status { code, body });
        }
        serde_json::from_str(&body).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get_json(&self, url: &str) -> Result<Value, TransportError> {
        Self::finish(
            self.agent
                .get(url)
                .header("User-Agent", USER_AGENT)
                .header("Accept", "application/json")
                .call(),
        )
    }

    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        Self::finish(
            self.agent
                .post(url)
                .header("User-Agent", USER_AGENT)
                .send_json(body),
        )
    }
}

/// Exponential backoff: `retries` extra attempts after the first, sleeping
/// `base`, `2*base`, `4*base`, ... between them. Only retryable errors are
/// retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(
        &self,
        mut call: impl FnMut() -> Result<T, TransportError>,
    ) -> Result<T, TransportError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    let delay = self.base * 2u32.saturating_pow(attempt);
                    log::debug!("retrying after {delay:?}: {e}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Percent-encodes a path segment or query value.
pub fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    #[test]
    fn retry_stops_after_budget() {
        let calls = Cell::new(0);
        let policy = RetryPolicy {
            retries: 3,
            base: Duration::from_millis(1),
        };
        let out: Result<(), _> = policy.run(|| {
            calls.set(calls.get() + 1);
            Err(TransportError::Connect("refused".into()))
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 4);
    }

    #[test]
    fn non_retryable_fails_fast() {
        let calls = Cell::new(0);
        let out: Result<(), _> = RetryPolicy::default().run(|| {
            calls.set(calls.get() + 1);
            Err(TransportError::Status {
                code: 404,
                body: String::new(),
            })
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn encodes_titles() {
        assert_eq!(encode_component("Reserve Bank of India"), "Reserve%20Bank%20of%20India");
        assert_eq!(encode_component("Café"), "Caf%C3%A9");
    }
}
