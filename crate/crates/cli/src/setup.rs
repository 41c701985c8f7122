//! Turning flags into endpoint configs, a gateway, a catalog and samples.

use std::path::Path;

use anyhow::{Context, Result};
use rmcontrast::dataset::{load, sample, DatasetRegistry, DatasetSpec, SamplePlan};
use rmcontrast::gateway::{EndpointConfig, Gateway, ResponseCache};
use rmcontrast::pipeline::RewardModel;
use rmcontrast::{AttributeCatalog, Comparison};
use serde::Deserialize;
use tracing::info;

use crate::args::{DatasetArgs, EndpointArgs};
use crate::exit::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointsFile {
    chat: Option<EndpointConfig>,
    embedding: Option<EndpointConfig>,
    #[serde(default)]
    models: Vec<RewardModel>,
}

/// Resolved endpoints of a command.
#[derive(Debug, Clone)]
pub struct Endpoints {
    pub chat: EndpointConfig,
    pub embedding: EndpointConfig,
    pub models: Vec<RewardModel>,
}

impl EndpointArgs {
    fn endpoint(&self, base_url: &str, model_name: &str) -> EndpointConfig {
        let mut cfg = EndpointConfig::new(base_url.trim_end_matches('/'), model_name);
        cfg.timeout = self.timeout;
        cfg.max_retries = self.retries;
        cfg.auth_token_env = self.auth_env.clone();
        cfg
    }

    /// Endpoints from the optional file, then from flags. `--models`
    /// replaces the file's model list when given.
    pub fn resolve(&self) -> Result<Endpoints> {
        let file = match &self.endpoints {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading endpoints file {}", path.display()))?;
                toml::from_str::<EndpointsFile>(&text)
                    .map_err(|e| UsageError(format!("endpoints file {}: {e}", path.display())))?
            }
            None => EndpointsFile::default(),
        };
        let chat = file
            .chat
            .unwrap_or_else(|| self.endpoint(&self.base_url, &self.chat_model));
        let embedding = file
            .embedding
            .unwrap_or_else(|| self.endpoint(&self.base_url, &self.embedding_model));
        let models = if self.models.is_empty() {
            file.models
        } else {
            self.models.iter().map(|m| self.model(m)).collect::<Result<_>>()?
        };
        if models.is_empty() {
            return Err(UsageError("no reward model given; pass --models or an endpoints file".into()).into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &models {
            if !seen.insert(m.id.as_str()) {
                return Err(UsageError(format!("reward model `{}` is listed twice", m.id)).into());
            }
        }
        for cfg in models.iter().map(|m| &m.endpoint).chain([&chat, &embedding]) {
            cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        }
        Ok(Endpoints { chat, embedding, models })
    }

    fn model(&self, spec: &str) -> Result<RewardModel> {
        let (id, url) = match spec.split_once('=') {
            Some((id, url)) => (id.trim(), url.trim()),
            None => (spec.trim(), self.base_url.as_str()),
        };
        if id.is_empty() || url.is_empty() {
            return Err(UsageError(format!("bad model `{spec}`; expected `id` or `id=URL`")).into());
        }
        Ok(RewardModel {
            id: id.to_string(),
            endpoint: self.endpoint(url, id),
            scalarisation: None,
        })
    }

    pub fn cache(&self) -> Result<ResponseCache> {
        if self.no_cache {
            return Ok(ResponseCache::in_memory());
        }
        Ok(ResponseCache::on_disk(&self.cache)?)
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let cache = self.cache()?;
        Ok(if self.offline {
            Gateway::offline(cache)
        } else {
            Gateway::http(cache)
        })
    }
}

pub fn catalog(path: Option<&Path>) -> Result<AttributeCatalog> {
    match path {
        Some(p) => AttributeCatalog::from_json_file(p).map_err(|e| UsageError(format!("{}: {e}", p.display())).into()),
        None => Ok(AttributeCatalog::default()),
    }
}

/// The dataset entry, its comparisons and one sample per seed.
pub struct Samples {
    pub spec: DatasetSpec,
    pub plan: SamplePlan,
    pub samples: Vec<(u64, Vec<Comparison>)>,
}

impl DatasetArgs {
    pub fn spec(&self) -> Result<DatasetSpec> {
        let registry = DatasetRegistry::from_toml_file(&self.registry)
            .map_err(|e| UsageError(format!("dataset registry: {e}")))?;
        let spec = registry.get(&self.dataset).cloned().ok_or_else(|| {
            let known: Vec<&str> = registry.names().collect();
            UsageError(format!(
                "dataset `{}` is not in {} (known: {})",
                self.dataset,
                self.registry.display(),
                known.join(", ")
            ))
        })?;
        Ok(spec)
    }

    pub fn plan(&self) -> Result<SamplePlan> {
        SamplePlan::new(self.n, self.seeds.clone()).map_err(|e| UsageError(e.to_string()).into())
    }

    pub fn load(&self) -> Result<Samples> {
        let spec = self.spec()?;
        let plan = self.plan()?;
        let loaded = load(&spec)?;
        info!(
            dataset = %spec.name,
            comparisons = loaded.comparisons.len(),
            dropped = loaded.dropped.len(),
            "dataset loaded"
        );
        let samples = sample(&loaded.comparisons, &plan).map_err(|e| UsageError(e.to_string()))?;
        Ok(Samples { spec, plan, samples })
    }
}
