//! Clients for the chat, reward and embedding services.
//!
//! Wire protocols:
//!
//! * chat: `POST {base}/v1/chat/completions`, OpenAI-compatible; the first
//!   choice's `message.content` is the completion.
//! * embedding: `POST {base}/v1/embeddings` with `{"model", "input"}`;
//!   `data[0].embedding` is the vector.
//! * reward: `POST {base}/score` with `{"prompt", "response"}`, answered by
//!   `{"reward": number}` or `{"rewards": [number, ...]}`.
//!
//! Every successful response body is cached under a [`CacheKey`]. A second
//! identical request waits for the first one in flight and then reads the
//! cache.

mod cache;
mod config;
mod transport;

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};
use tracing::{debug, warn};

pub use cache::{canonical_json, CacheEnvelope, CacheKey, Cached, EndpointKind, ResponseCache};
pub use config::{EndpointConfig, ScalarisationSpec};
pub use transport::{HttpRequest, HttpTransport, NoNetwork, Transport, TransportFailure};

pub use crate::error::GatewayError;
use crate::types::RewardValue;

pub const CHAT_PATH: &str = "/v1/chat/completions";
pub const EMBEDDINGS_PATH: &str = "/v1/embeddings";
pub const SCORE_PATH: &str = "/score";

/// Shared client for all three services.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    cache: ResponseCache,
    offline: bool,
    network_requests: AtomicU64,
    cache_hits: AtomicU64,
    missing: Mutex<BTreeSet<String>>,
    inflight: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("cache_dir", &self.cache.dir())
            .field("offline", &self.offline)
            .finish()
    }
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, cache: ResponseCache) -> Self {
        Gateway {
            transport,
            cache,
            offline: false,
            network_requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            missing: Mutex::default(),
            inflight: Mutex::default(),
        }
    }

    /// HTTP transport with an optional on-disk cache.
    pub fn http(cache: ResponseCache) -> Self {
        Self::new(Arc::new(HttpTransport::new()), cache)
    }

    /// Serve only from cache; misses fail with [`GatewayError::CacheMiss`] and
    /// are remembered (see [`Gateway::missing_digests`]).
    pub fn offline(cache: ResponseCache) -> Self {
        let mut g = Self::new(Arc::new(NoNetwork), cache);
        g.offline = true;
        g
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn missing_digests(&self) -> Vec<String> {
        self.missing.lock().expect("missing lock").iter().cloned().collect()
    }

    fn key_lock(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        self.inflight
            .lock()
            .expect("inflight lock")
            .entry(key.clone())
            .or_default()
            .clone()
    }

    fn request(
        &self,
        kind: EndpointKind,
        config: &EndpointConfig,
        path: &str,
        body: &Value,
    ) -> Result<String, GatewayError> {
        config.validate()?;
        let temperature = (kind == EndpointKind::Chat).then_some(config.temperature);
        let key = CacheKey::new(kind, &config.base_url, &config.model_name, temperature, body);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().expect("request lock");

        let url = config.url(path);
        if let Some(hit) = self.cache.get(&key)? {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return match hit {
                Cached::Response(body) => Ok(body),
                Cached::Rejected { status, body } => Err(GatewayError::Status { url, status, body }),
            };
        }
        if self.offline {
            self.missing.lock().expect("missing lock").insert(key.to_string());
            return Err(GatewayError::CacheMiss(key.to_string()));
        }

        let payload = body.to_string();
        let token = config.bearer_token()?;
        let mut last = String::new();
        let attempts = config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            self.network_requests.fetch_add(1, Ordering::SeqCst);
            let request = HttpRequest {
                url: &url,
                body: &payload,
                bearer: token.as_deref(),
                timeout: config.timeout_duration(),
            };
            match self.transport.post_json(&request) {
                Ok(response) => {
                    self.cache.put(&key, body, &Cached::Response(response.clone()))?;
                    return Ok(response);
                }
                Err(failure) if failure.is_transient() => {
                    debug!(%url, attempt, ?failure, "transient failure");
                    last = match failure {
                        TransportFailure::Io(m) => m,
                        TransportFailure::Status { status, body } => format!("HTTP {status}: {body}"),
                    };
                }
                Err(TransportFailure::Status { status, body: text }) => {
                    self.cache.put(
                        &key,
                        body,
                        &Cached::Rejected {
                            status,
                            body: text.clone(),
                        },
                    )?;
                    return Err(GatewayError::Status { url, status, body: text });
                }
                Err(TransportFailure::Io(m)) => unreachable!("io failures are transient: {m}"),
            }
        }
        warn!(%url, attempts, "giving up");
        Err(GatewayError::Transport {
            url,
            attempts,
            message: last,
        })
    }

    /// One chat completion. `seed` distinguishes otherwise identical
    /// requests, both on the wire and in the cache.
    pub fn chat_with_seed(
        &self,
        config: &EndpointConfig,
        system_text: Option<&str>,
        user_text: &str,
        seed: Option<u64>,
    ) -> Result<String, GatewayError> {
        if user_text.is_empty() {
            return Err(crate::error::InvalidInput::new("chat user text is empty").into());
        }
        let mut messages = Vec::new();
        if let Some(system) = system_text {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": user_text}));
        let mut body = json!({
            "model": config.model_name,
            "messages": messages,
            "temperature": config.temperature,
        });
        if let Some(seed) = seed {
            body["seed"] = json!(seed);
        }
        let url = config.url(CHAT_PATH);
        let raw = self.request(EndpointKind::Chat, config, CHAT_PATH, &body)?;
        let parsed: Value = serde_json::from_str(&raw).map_err(|e| GatewayError::Protocol {
            url: url.clone(),
            message: e.to_string(),
        })?;
        let content = parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Protocol {
                url,
                message: "missing choices[0].message.content".into(),
            })?;
        if content.trim().is_empty() {
            return Err(GatewayError::EmptyGeneration);
        }
        Ok(content.to_string())
    }

    pub fn chat(
        &self,
        config: &EndpointConfig,
        system_text: Option<&str>,
        user_text: &str,
    ) -> Result<String, GatewayError> {
        self.chat_with_seed(config, system_text, user_text, None)
    }

    /// Score one response. Vector rewards are collapsed with `scalarisation`.
    pub fn score(
        &self,
        config: &EndpointConfig,
        scalarisation: Option<&ScalarisationSpec>,
        prompt: &str,
        response: &str,
    ) -> Result<RewardValue, GatewayError> {
        if prompt.is_empty() || response.is_empty() {
            return Err(crate::error::InvalidInput::new("prompt and response must be non-empty").into());
        }
        let body = json!({"prompt": prompt, "response": response});
        let url = config.url(SCORE_PATH);
        let raw = self.request(EndpointKind::Reward, config, SCORE_PATH, &body)?;
        let parsed: Value = serde_json::from_str(&raw).map_err(|e| GatewayError::Protocol {
            url: url.clone(),
            message: e.to_string(),
        })?;
        let protocol = |message: &str| GatewayError::Protocol {
            url: url.clone(),
            message: message.to_string(),
        };
        if let Some(r) = parsed.get("reward") {
            let scalar = r.as_f64().ok_or_else(|| protocol("`reward` is not a number"))?;
            return Ok(RewardValue::scalar(scalar));
        }
        let vector: Vec<f64> = parsed
            .get("rewards")
            .and_then(Value::as_array)
            .ok_or_else(|| protocol("expected `reward` or `rewards`"))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| protocol("`rewards` holds a non-number")))
            .collect::<Result<_, _>>()?;
        let spec = scalarisation.ok_or_else(|| {
            GatewayError::Config(format!(
                "endpoint {} returned a {}-dimensional reward but no scalarisation is configured",
                config.model_name,
                vector.len()
            ))
        })?;
        let scalar = spec.apply(&vector)?;
        Ok(RewardValue {
            scalar,
            vector: Some(vector),
            scalarisation_applied: true,
        })
    }

    /// Embed `text` and normalize to unit L2 length.
    pub fn embed(&self, config: &EndpointConfig, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.is_empty() {
            return Err(crate::error::InvalidInput::new("cannot embed empty text").into());
        }
        let body = json!({"model": config.model_name, "input": text});
        let url = config.url(EMBEDDINGS_PATH);
        let raw = self.request(EndpointKind::Embedding, config, EMBEDDINGS_PATH, &body)?;
        let parsed: Value = serde_json::from_str(&raw).map_err(|e| GatewayError::Protocol {
            url: url.clone(),
            message: e.to_string(),
        })?;
        let vector: Vec<f64> = parsed
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::Protocol {
                url: url.clone(),
                message: "missing data[0].embedding".into(),
            })?
            .iter()
            .map(|v| v.as_f64())
            .collect::<Option<_>>()
            .ok_or_else(|| GatewayError::Protocol {
                url,
                message: "embedding holds a non-number".into(),
            })?;
        normalize(vector)
    }
}

/// Scale to unit L2 norm.
pub fn normalize(mut vector: Vec<f64>) -> Result<Vec<f64>, GatewayError> {
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(GatewayError::DegenerateEmbedding);
    }
    vector.iter_mut().for_each(|x| *x /= norm);
    Ok(vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    /// Answers from a fixed script and counts calls.
    struct Scripted {
        replies: Mutex<Vec<Result<String, TransportFailure>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: Vec<Result<String, TransportFailure>>) -> Arc<Self> {
            Arc::new(Scripted {
                replies: Mutex::new(replies),
                calls: AtomicUsize::new(0),
            })
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, _request: &HttpRequest<'_>) -> Result<String, TransportFailure> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut r = self.replies.lock().unwrap();
            if r.len() > 1 {
                r.remove(0)
            } else {
                r[0].clone()
            }
        }
    }

    fn cfg() -> EndpointConfig {
        EndpointConfig::new("http://mock", "m").with_retries(2, 0)
    }

    fn err500() -> Result<String, TransportFailure> {
        Err(TransportFailure::Status {
            status: 500,
            body: "boom".into(),
        })
    }

    #[test]
    fn scalar_reward_passes_through() {
        let t = Scripted::new(vec![Ok(r#"{"reward": 1.25}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        assert_eq!(g.score(&cfg(), None, "p", "r").unwrap(), RewardValue::scalar(1.25));
    }

    #[test]
    fn vector_reward_is_scalarised() {
        let t = Scripted::new(vec![Ok(r#"{"rewards": [2, 1, 0]}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        let w = ScalarisationSpec::new(vec![0.5, 0.5, 1.0]);
        let r = g.score(&cfg(), Some(&w), "p", "r").unwrap();
        assert_eq!(r.scalar, 1.5);
        assert!(r.scalarisation_applied);
        assert_eq!(r.vector, Some(vec![2.0, 1.0, 0.0]));
    }

    #[test]
    fn vector_reward_without_or_with_wrong_weights_is_config_error() {
        let t = Scripted::new(vec![Ok(r#"{"rewards": [1, 2]}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        assert!(matches!(g.score(&cfg(), None, "p", "r"), Err(GatewayError::Config(_))));
        let w = ScalarisationSpec::new(vec![1.0, 1.0, 1.0]);
        assert!(matches!(g.score(&cfg(), Some(&w), "p", "r"), Err(GatewayError::Config(_))));
    }

    #[test]
    fn retries_then_transport_error() {
        let t = Scripted::new(vec![err500()]);
        let g = Gateway::new(t.clone(), ResponseCache::in_memory());
        let err = g.chat(&cfg(), None, "hi").unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 3, .. }));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transient_failure_recovers() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"done"}}]}"#;
        let t = Scripted::new(vec![err500(), Ok(ok.into())]);
        let g = Gateway::new(t.clone(), ResponseCache::in_memory());
        assert_eq!(g.chat(&cfg(), None, "hi").unwrap(), "done");
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn not_found_is_not_retried() {
        let t = Scripted::new(vec![Err(TransportFailure::Status {
            status: 404,
            body: "no fixture".into(),
        })]);
        let g = Gateway::new(t.clone(), ResponseCache::in_memory());
        assert!(matches!(
            g.chat(&cfg(), None, "hi"),
            Err(GatewayError::Status { status: 404, .. })
        ));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let ok = r#"{"choices":[{"message":{"content":"x"}}]}"#;
        let t = Scripted::new(vec![Ok(ok.into())]);
        let g = Gateway::new(t.clone(), ResponseCache::in_memory());
        g.chat(&cfg(), Some("sys"), "hi").unwrap();
        g.chat(&cfg(), Some("sys"), "hi").unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        assert_eq!(g.cache_hits(), 1);
        assert_eq!(g.network_requests(), 1);
        // A different seed is a different request.
        g.chat_with_seed(&cfg(), Some("sys"), "hi", Some(3)).unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn empty_completion_is_an_error() {
        let t = Scripted::new(vec![Ok(r#"{"choices":[{"message":{"content":"  "}}]}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        assert!(matches!(g.chat(&cfg(), None, "hi"), Err(GatewayError::EmptyGeneration)));
    }

    #[test]
    fn embeddings_are_normalized_and_zero_rejected() {
        let t = Scripted::new(vec![Ok(r#"{"data":[{"embedding":[3, 4]}]}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        let v = g.embed(&cfg(), "t").unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);

        let t = Scripted::new(vec![Ok(r#"{"data":[{"embedding":[0, 0]}]}"#.into())]);
        let g = Gateway::new(t, ResponseCache::in_memory());
        assert!(matches!(g.embed(&cfg(), "t"), Err(GatewayError::DegenerateEmbedding)));
    }

    #[test]
    fn offline_gateway_records_misses() {
        let g = Gateway::offline(ResponseCache::in_memory());
        let err = g.score(&cfg(), None, "p", "r").unwrap_err();
        assert!(err.is_transport());
        assert_eq!(g.missing_digests().len(), 1);
        assert_eq!(g.network_requests(), 0);
    }

    #[test]
    fn concurrent_identical_requests_hit_network_once() {
        let t = Scripted::new(vec![Ok(r#"{"reward": 2}"#.into())]);
        let g = Gateway::new(t.clone(), ResponseCache::in_memory());
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| g.score(&cfg(), None, "p", "r").unwrap());
            }
        });
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }
}
