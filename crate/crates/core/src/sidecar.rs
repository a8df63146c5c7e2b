//! Client for the model sidecar's JSON protocol.
//!
//! ```text
//! POST /v1/entail  {"pairs":[{"premise":s,"hypothesis":s}]} -> {"scores":[f64]}
//! POST /v1/ner     {"text":s} -> {"entities":[{"surface","kind","start","end"}]}
//! GET  /v1/health  -> {"status":"ok","model":s}
//! ```
//!
//! Offsets in `/v1/ner` responses are byte offsets into the request text.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::{HttpTransport, RetryPolicy, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRequest<'a> {
    pub premise: &'a str,
    pub hypothesis: &'a str,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntailRequest<'a> {
    #[serde(borrow)]
    pub pairs: Vec<PairRequest<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerEntity {
    pub surface: String,
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerResponse {
    pub entities: Vec<NerEntity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

#[derive(Clone)]
pub struct SidecarClient {
    endpoint: String,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    max_batch: usize,
}

impl std::fmt::Debug for SidecarClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SidecarClient")
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .field("max_batch", &self.max_batch)
            .finish()
    }
}

impl SidecarClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::with_transport(endpoint, Arc::new(HttpTransport::new(timeout)))
    }

    pub fn with_transport(endpoint: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            transport,
            retry: RetryPolicy::default(),
            max_batch: 32,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint, path)
    }

    fn backend_error(&self, e: TransportError) -> Error {
        match e {
            TransportError::Decode(message) => Error::Protocol {
                endpoint: self.endpoint.clone(),
                message,
            },
            other => Error::Backend {
                backend: format!("sidecar({})", self.endpoint),
                retryable: other.is_retryable(),
                message: other.to_string(),
            },
        }
    }

    fn decode<T: for<'de> Deserialize<'de>>(&self, value: Value) -> Result<T> {
        serde_json::from_value(value).map_err(|e| Error::Protocol {
            endpoint: self.endpoint.clone(),
            message: e.to_string(),
        })
    }

    pub fn health(&self) -> Result<HealthResponse> {
        let url = self.url("/v1/health");
        let value = self
            .retry
            .run(|| self.transport.get_json(&url))
            .map_err(|e| self.backend_error(e))?;
        self.decode(value)
    }

    /// Scores pairs in chunks of at most `max_batch`, preserving order.
    pub fn entail(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        let url = self.url("/v1/entail");
        let mut scores = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.max_batch) {
            let request = EntailRequest {
                pairs: chunk
                    .iter()
                    .map(|(p, h)| PairRequest {
                        premise: p,
                        hypothesis: h,
                    })
                    .collect(),
            };
            let body = serde_json::to_value(&request).expect("request serializes");
            let value = self
                .retry
                .run(|| self.transport.post_json(&url, &body))
                .map_err(|e| self.backend_error(e))?;
            let response: EntailResponse = self.decode(value)?;
            if response.scores.len() != chunk.len() {
                return Err(Error::Protocol {
                    endpoint: self.endpoint.clone(),
                    message: format!(
                        "sent {} pairs, received {} scores",
                        chunk.len(),
                        response.scores.len()
                    ),
                });
            }
            if let Some(bad) = response.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                return Err(Error::Protocol {
                    endpoint: self.endpoint.clone(),
                    message: format!("score {bad} outside [0, 1]"),
                });
            }
            scores.extend(response.scores);
        }
        Ok(scores)
    }

    pub fn ner(&self, text: &str) -> Result<Vec<NerEntity>> {
        let url = self.url("/v1/ner");
        let body = serde_json::json!({ "text": text });
        let value = self
            .retry
            .run(|| self.transport.post_json(&url, &body))
            .map_err(|e| self.backend_error(e))?;
        let response: NerResponse = self.decode(value)?;
        Ok(response.entities)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use std::sync::Mutex;

    use super::*;

    pub type Handler = Box<dyn Fn(&str, Option<&Value>) -> Result<Value, TransportError> + Send + Sync>;

    /// Scripted transport: answers every call with a closure over the
    /// request and counts calls.
    pub struct FakeTransport {
        pub handler: Handler,
        pub calls: Mutex<Vec<(String, Option<Value>)>>,
    }

    impl FakeTransport {
        pub fn new(
            handler: impl Fn(&str, Option<&Value>) -> Result<Value, TransportError> + Send + Sync + 'static,
        ) -> Self {
            Self {
                handler: Box::new(handler),
                calls: Mutex::new(Vec::new()),
            }
        }

        pub fn call_count(&self) -> usize {
            self.calls.lock().unwrap().len()
        }
    }

    impl Transport for FakeTransport {
        fn get_json(&self, url: &str) -> Result<Value, TransportError> {
            self.calls.lock().unwrap().push((url.to_string(), None));
            (self.handler)(url, None)
        }

        fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
            self.calls
                .lock()
                .unwrap()
                .push((url.to_string(), Some(body.clone())));
            (self.handler)(url, Some(body))
        }
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::testing::FakeTransport;
    use super::*;

    fn pairs(n: usize) -> Vec<(String, String)> {
        (0..n).map(|i| (format!("p{i}"), format!("h{i}"))).collect()
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            retries: 3,
            base: Duration::from_millis(1),
        }
    }

    #[test]
    fn chunks_and_reassembles_in_order() {
        // Score encodes the pair index so ordering is checkable.
        let fake = Arc::new(FakeTransport::new(|_, body| {
            let pairs = body.unwrap()["pairs"].as_array().unwrap().clone();
            let scores: Vec<f64> = pairs
                .iter()
                .map(|p| p["premise"].as_str().unwrap()[1..].parse::<f64>().unwrap() / 10.0)
                .collect();
            Ok(json!({ "scores": scores }))
        }));
        let client = SidecarClient::with_transport("http://sidecar/", fake.clone()).with_max_batch(2);
        let scores = client.entail(&pairs(5)).unwrap();
        assert_eq!(scores, [0.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(fake.call_count(), 3);
        assert!(fake.calls.lock().unwrap()[0].0.ends_with("/v1/entail"));
    }

    #[test]
    fn short_response_is_protocol_error() {
        let fake = Arc::new(FakeTransport::new(|_, _| Ok(json!({ "scores": [0.5, 0.5, 0.5, 0.5] }))));
        let client = SidecarClient::with_transport("http://sidecar", fake);
        assert!(matches!(client.entail(&pairs(5)), Err(Error::Protocol { .. })));
    }

    #[test]
    fn echo_sidecar() {
        let fake = Arc::new(FakeTransport::new(|_, body| {
            let n = body.unwrap()["pairs"].as_array().unwrap().len();
            Ok(json!({ "scores": vec![0.5; n] }))
        }));
        let client = SidecarClient::with_transport("http://sidecar", fake);
        assert_eq!(client.entail(&pairs(5)).unwrap(), vec![0.5; 5]);
    }

    #[test]
    fn connection_failure_retries_then_fails() {
        let fake = Arc::new(FakeTransport::new(|_, _| {
            Err(TransportError::Connect("refused".into()))
        }));
        let client = SidecarClient::with_transport("http://sidecar", fake.clone()).with_retry(fast_retry());
        let err = client.entail(&pairs(1)).unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
        assert_eq!(fake.call_count(), 4);
    }

    #[test]
    fn malformed_body_is_protocol_error() {
        let fake = Arc::new(FakeTransport::new(|_, _| Ok(json!({ "scorez": [] }))));
        let client = SidecarClient::with_transport("http://sidecar", fake);
        assert!(matches!(client.entail(&pairs(1)), Err(Error::Protocol { .. })));
        let fake = Arc::new(FakeTransport::new(|_, _| Ok(json!({ "scores": [1.5] }))));
        let client = SidecarClient::with_transport("http://sidecar", fake);
        assert!(matches!(client.entail(&pairs(1)), Err(Error::Protocol { .. })));
    }

    #[test]
    fn health_and_ner_decode() {
        let fake = Arc::new(FakeTransport::new(|url, _| {
            if url.ends_with("/v1/health") {
                Ok(json!({"status": "ok", "model": "roberta-large-mnli"}))
            } else {
                Ok(json!({"entities": [{"surface": "RBI", "kind": "ORG", "start": 0, "end": 3}]}))
            }
        }));
        let client = SidecarClient::with_transport("http://sidecar", fake);
        assert_eq!(client.health().unwrap().model, "roberta-large-mnli");
        let ents = client.ner("RBI acted.").unwrap();
        assert_eq!(ents[0].end, 3);
    }
}
