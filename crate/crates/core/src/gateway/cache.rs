//! Content-addressed response cache.
//!
//! Layout: one file per digest, `<dir>/<digest>.json`, holding
//! `{"request": .., "response": "<raw body>", "timestamp": <unix seconds>}`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

/// Kind of endpoint a request targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Chat,
    Reward,
    Embedding,
}

impl EndpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Chat => "chat",
            EndpointKind::Reward => "reward",
            EndpointKind::Embedding => "embedding",
        }
    }
}

/// SHA-256 digest identifying a logical request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    digest: String,
}

impl CacheKey {
    pub fn new(
        kind: EndpointKind,
        base_url: &str,
        model_name: &str,
        temperature: Option<f64>,
        body: &Value,
    ) -> Self {
        let envelope = serde_json::json!({
            "kind": kind.as_str(),
            "base_url": base_url.trim_end_matches('/'),
            "model_name": model_name,
            "temperature": temperature,
            "body": body,
        });
        let canonical = canonical_json(&envelope);
        CacheKey {
            digest: hex::encode(Sha256::digest(canonical.as_bytes())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.digest
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digest)
    }
}

/// Compact JSON with object keys in sorted order.
pub fn canonical_json(value: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut entries: Vec<_> = map.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sort(v))).collect())
            }
            Value::Array(items) => Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(value).to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEnvelope {
    pub request: Value,
    pub response: String,
    /// HTTP status of a cached client error; absent for successes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub timestamp: u64,
}

/// A stored endpoint answer: a response body, or a deterministic client
/// error that would recur on every retry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cached {
    Response(String),
    Rejected { status: u16, body: String },
}

impl Cached {
    fn from_envelope(e: CacheEnvelope) -> Self {
        match e.status {
            Some(status) => Cached::Rejected {
                status,
                body: e.response,
            },
            None => Cached::Response(e.response),
        }
    }
}

/// In-memory map optionally backed by a directory.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<CacheKey, Cached>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| GatewayError::Cache {
            path: dir.clone(),
            message: e.to_string(),
        })?;
        Ok(ResponseCache {
            dir: Some(dir),
            memory: RwLock::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn entry_path(&self, key: &CacheKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.json", key.as_str())))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<Cached>, GatewayError> {
        if let Some(hit) = self.memory.read().expect("cache lock").get(key) {
            return Ok(Some(hit.clone()));
        }
        let Some(path) = self.entry_path(key) else {
            return Ok(None);
        };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(GatewayError::Cache {
                    path,
                    message: e.to_string(),
                })
            }
        };
        let envelope: CacheEnvelope = serde_json::from_str(&text).map_err(|e| GatewayError::Cache {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let cached = Cached::from_envelope(envelope);
        self.memory
            .write()
            .expect("cache lock")
            .insert(key.clone(), cached.clone());
        Ok(Some(cached))
    }

    pub fn put(&self, key: &CacheKey, request: &Value, cached: &Cached) -> Result<(), GatewayError> {
        if let Some(path) = self.entry_path(key) {
            let timestamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let (response, status) = match cached {
                Cached::Response(body) => (body.clone(), None),
                Cached::Rejected { status, body } => (body.clone(), Some(*status)),
            };
            let envelope = CacheEnvelope {
                request: request.clone(),
                response,
                status,
                timestamp,
            };
            let text = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
            // Write-then-rename so concurrent readers never see a partial file.
            let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
            std::fs::write(&tmp, text)
                .and_then(|_| std::fs::rename(&tmp, &path))
                .map_err(|e| GatewayError::Cache {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        self.memory
            .write()
            .expect("cache lock")
            .insert(key.clone(), cached.clone());
        Ok(())
    }
}
