//! Run directories: persisted pipeline results, derived reports, replay.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json        run settings, catalog and endpoint configs
//! comparisons.jsonl    one line per sampled comparison and its outcome
//! perturbations.jsonl  one line per generated rewrite
//! rewards.jsonl        one line per reward (originals and rewrites, per model)
//! labels.jsonl         one line per counterfactual/semifactual label
//! failures.jsonl       generation and scoring failures
//! reports/             CSV tables, JSON reports, SVG charts
//! ```

mod manifest;
mod reports;
mod store;
mod tables;

use std::collections::BTreeSet;
use std::path::Path;

use tracing::info;

pub use manifest::{new_run_id, ManifestParts, RunManifest};
pub use reports::{build_reports, method_label, model_dir, table_row};
pub use store::{
    persist, read_manifest, read_record, read_reports, write_reports, ReportFiles, RunRecord, COMPARISONS_FILE,
    FAILURES_FILE, LABELS_FILE, MANIFEST_FILE, PERTURBATIONS_FILE, REPORTS_DIR, REWARDS_FILE,
};
pub use tables::{emit_sensitivity_chart, emit_tables, format_mean_std, TableRow, COVERAGE_HEADER, DISTANCE_HEADER};

use crate::error::{Error, RunStoreError};
use crate::gateway::Gateway;
use crate::metrics::GatewayEmbedder;
use crate::perturbation::TemplateSet;
use crate::pipeline::{Pipeline, SeedRun};
use crate::types::Comparison;

/// Prompt templates a manifest refers to.
pub fn manifest_templates(manifest: &RunManifest) -> Result<TemplateSet, Error> {
    Ok(match &manifest.template_dir {
        Some(dir) => TemplateSet::with_overrides(dir)?,
        None => TemplateSet::default(),
    })
}

/// Run the pipeline over per-seed samples and derive the reports.
pub fn execute(manifest: RunManifest, samples: &[(u64, Vec<Comparison>)], gateway: &Gateway) -> Result<RunRecord, Error> {
    manifest.validate()?;
    let templates = manifest_templates(&manifest)?;
    let pipeline = Pipeline {
        gateway,
        chat: &manifest.chat,
        models: &manifest.models,
        catalog: &manifest.catalog,
        templates: &templates,
        options: &manifest.options,
    };
    let seeds = samples
        .iter()
        .map(|(seed, sampled)| pipeline.run_seed(*seed, sampled))
        .collect::<Result<Vec<SeedRun>, Error>>()?;
    let embedder = GatewayEmbedder {
        gateway,
        config: &manifest.embedding,
    };
    let reports = build_reports(&manifest, &seeds, &embedder)?;
    Ok(RunRecord {
        manifest,
        seeds,
        reports,
    })
}

/// The sampled comparisons of a persisted run, per seed, in order.
pub fn record_samples(record: &RunRecord) -> Vec<(u64, Vec<Comparison>)> {
    record
        .seeds
        .iter()
        .map(|s| (s.seed, s.comparisons.iter().map(|c| c.comparison.clone()).collect()))
        .collect()
}

/// Recompute a persisted run from cached endpoint responses and check that
/// every result and report matches. Use an offline gateway so that nothing
/// reaches the network.
pub fn replay(dir: &Path, gateway: &Gateway) -> Result<RunRecord, Error> {
    let stored = read_record(dir)?;
    let samples = record_samples(&stored);
    let replayed = execute(stored.manifest.clone(), &samples, gateway)?;
    let missing = gateway.missing_digests();
    if !missing.is_empty() {
        return Err(RunStoreError::ReplayIncomplete(missing).into());
    }
    let mut mismatches = Vec::new();
    for (a, b) in stored.seeds.iter().zip(&replayed.seeds) {
        if a != b {
            mismatches.push(format!("results of seed {}", a.seed));
        }
    }
    if stored.seeds.len() != replayed.seeds.len() {
        mismatches.push("seed count".into());
    }
    let names: BTreeSet<&String> = stored.reports.keys().chain(replayed.reports.keys()).collect();
    for name in names {
        if stored.reports.get(name) != replayed.reports.get(name) {
            mismatches.push(format!("{REPORTS_DIR}/{name}"));
        }
    }
    if !mismatches.is_empty() {
        return Err(RunStoreError::ReplayMismatch(mismatches).into());
    }
    info!(run = %stored.manifest.run_id, "replay reproduced every result");
    Ok(replayed)
}
