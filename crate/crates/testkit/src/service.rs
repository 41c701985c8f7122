//! Request handling shared by the in-process transport and the HTTP server.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rmcontrast::gateway::{HttpRequest, Transport, TransportFailure, CHAT_PATH, EMBEDDINGS_PATH, SCORE_PATH};
use serde_json::{json, Value};
use tracing::debug;

use crate::canned::CannedPerturbationSpec;
use crate::embed::{hash_embed, DEFAULT_DIM};
use crate::toy::{toy_reward, ToyRewardSpec};

/// The three mock endpoints. Reward models are selected by the path prefix
/// before `/score` (`/score` itself uses the default model under `""`).
#[derive(Debug)]
pub struct MockServices {
    pub rewards: BTreeMap<String, ToyRewardSpec>,
    pub canned: CannedPerturbationSpec,
    pub embed_dim: usize,
    requests: AtomicU64,
}

impl MockServices {
    pub fn new(reward: ToyRewardSpec, canned: CannedPerturbationSpec) -> Self {
        MockServices {
            rewards: BTreeMap::from([(String::new(), reward)]),
            canned,
            embed_dim: DEFAULT_DIM,
            requests: AtomicU64::new(0),
        }
    }

    /// Serve an extra reward model under `/<prefix>/score`.
    pub fn with_reward_model(mut self, prefix: &str, spec: ToyRewardSpec) -> Self {
        self.rewards.insert(prefix.trim_matches('/').to_string(), spec);
        self
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    /// Status code and JSON body for a POST to `path`.
    pub fn handle(&self, path: &str, body: &str) -> (u16, String) {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let path = path.split('?').next().unwrap_or_default().trim_end_matches('/');
        let Ok(request) = serde_json::from_str::<Value>(body) else {
            return error(400, "request body is not JSON");
        };
        if let Some(prefix) = path.strip_suffix(SCORE_PATH) {
            self.score(prefix.trim_matches('/'), &request)
        } else if path.ends_with(CHAT_PATH) {
            self.chat(&request)
        } else if path.ends_with(EMBEDDINGS_PATH) {
            self.embed(&request)
        } else {
            error(404, &format!("no route for {path}"))
        }
    }

    fn score(&self, prefix: &str, request: &Value) -> (u16, String) {
        let Some(spec) = self.rewards.get(prefix) else {
            return error(404, &format!("no reward model `{prefix}`"));
        };
        let (Some(prompt), Some(response)) = (request["prompt"].as_str(), request["response"].as_str()) else {
            return error(400, "score needs prompt and response");
        };
        (200, json!({ "reward": toy_reward(spec, prompt, response) }).to_string())
    }

    fn chat(&self, request: &Value) -> (u16, String) {
        let Some(messages) = request["messages"].as_array() else {
            return error(400, "chat needs messages");
        };
        let Some(user) = messages
            .iter()
            .rev()
            .find(|m| m["role"] == "user")
            .and_then(|m| m["content"].as_str())
        else {
            return error(400, "chat needs a user message");
        };
        match self.canned.answer(user) {
            Some(text) => (
                200,
                json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": text } }] }).to_string(),
            ),
            None => {
                debug!("no fixture for chat prompt");
                error(404, "no fixture for this prompt")
            }
        }
    }

    fn embed(&self, request: &Value) -> (u16, String) {
        let Some(input) = request["input"].as_str() else {
            return error(400, "embeddings need a string input");
        };
        let v = hash_embed(input, self.embed_dim);
        (200, json!({ "data": [{ "index": 0, "embedding": v }] }).to_string())
    }
}

fn error(status: u16, message: &str) -> (u16, String) {
    (status, json!({ "error": message }).to_string())
}

fn url_path(url: &str) -> &str {
    let rest = url.split_once("://").map(|(_, r)| r).unwrap_or(url);
    rest.find('/').map(|i| &rest[i..]).unwrap_or("/")
}

/// Serves requests without opening a socket.
impl Transport for MockServices {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        let (status, body) = self.handle(url_path(request.url), request.body);
        if status >= 400 {
            Err(TransportFailure::Status { status, body })
        } else {
            Ok(body)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes() {
        let s = MockServices::new(ToyRewardSpec::default(), CannedPerturbationSpec::default())
            .with_reward_model("strict", ToyRewardSpec {
                length_weight: 0.0,
                ..ToyRewardSpec::default()
            });
        let (status, body) = s.handle("/score", r#"{"prompt":"p","response":"hello world"}"#);
        assert_eq!(status, 200);
        let reward = serde_json::from_str::<Value>(&body).unwrap()["reward"].as_f64().unwrap();
        assert!((reward - 0.1).abs() < 1e-12);
        let (_, body) = s.handle("/strict/score", r#"{"prompt":"p","response":"hello world"}"#);
        assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["reward"], 0.0);
        assert_eq!(s.handle("/other/score", r#"{"prompt":"p","response":"x"}"#).0, 404);
        assert_eq!(s.handle("/nope", "{}").0, 404);
        assert_eq!(s.handle("/score", "not json").0, 400);
        let (status, _) = s.handle(
            "/v1/chat/completions",
            r#"{"messages":[{"role":"user","content":"hi"}]}"#,
        );
        assert_eq!(status, 404);
        assert_eq!(s.requests(), 6);
    }

    #[test]
    fn path_from_url() {
        assert_eq!(url_path("http://127.0.0.1:80/a/score"), "/a/score");
        assert_eq!(url_path("http://host"), "/");
    }
}
