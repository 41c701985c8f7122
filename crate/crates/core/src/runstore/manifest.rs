use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::catalog::AttributeCatalog;
use crate::dataset::{DatasetSpec, SamplePlan};
use crate::error::InvalidInput;
use crate::gateway::EndpointConfig;
use crate::pipeline::{PipelineOptions, RewardModel};
use crate::sampling::SplitMix64;

/// Everything needed to rerun a pipeline run. Endpoint configs only name
/// the environment variables holding credentials, never their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub command: String,
    pub dataset: DatasetSpec,
    pub plan: SamplePlan,
    pub models: Vec<RewardModel>,
    pub chat: EndpointConfig,
    pub embedding: EndpointConfig,
    pub options: PipelineOptions,
    pub catalog: AttributeCatalog,
    pub catalog_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
}

/// `YYYYMMDDTHHMMSSZ-xxxxxx` in UTC.
pub fn new_run_id() -> String {
    let now = chrono::Utc::now();
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or_default();
    let mut rng = SplitMix64::new(nanos ^ u64::from(std::process::id()).rotate_left(32));
    format!("{}-{:06x}", now.format("%Y%m%dT%H%M%SZ"), rng.next_u64() & 0xff_ffff)
}

pub struct ManifestParts {
    pub command: String,
    pub dataset: DatasetSpec,
    pub plan: SamplePlan,
    pub models: Vec<RewardModel>,
    pub chat: EndpointConfig,
    pub embedding: EndpointConfig,
    pub options: PipelineOptions,
    pub catalog: AttributeCatalog,
    pub template_dir: Option<PathBuf>,
}

impl RunManifest {
    pub fn new(parts: ManifestParts) -> Self {
        RunManifest {
            run_id: new_run_id(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            command: parts.command,
            dataset: parts.dataset,
            plan: parts.plan,
            models: parts.models,
            chat: parts.chat,
            embedding: parts.embedding,
            options: parts.options,
            catalog_hash: parts.catalog.content_hash(),
            catalog: parts.catalog,
            template_dir: parts.template_dir,
        }
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), InvalidInput> {
        if self.catalog.content_hash() != self.catalog_hash {
            return Err(InvalidInput::new(format!(
                "run {}: catalog hash {} does not match the stored catalog",
                self.run_id, self.catalog_hash
            )));
        }
        Ok(())
    }
}
