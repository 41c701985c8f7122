use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use serde_json::{json, Value};

use super::manifest::RunManifest;
use super::store::ReportFiles;
use super::tables::{emit_sensitivity_chart, emit_tables, TableRow};
use crate::analysis::{
    branch_correlation, correctness_split, cross_model_similarity, preference_flip_rate, representative_single_model,
    representative_two_models, SensitivityReport,
};
use crate::error::{AnalysisError, Error};
use crate::metrics::{coverage, distance_report, DistanceOptions, Embedder, MemoEmbedder};
use crate::pipeline::{ComparisonOutcome, SeedRun};
use crate::types::{Comparison, GeneratorKind, ScoredExplanationSet, Side};

/// Directory-safe form of a model id.
pub fn model_dir(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Label of the generation method in the tables.
pub fn method_label(manifest: &RunManifest) -> String {
    match manifest.options.generator {
        GeneratorKind::AttributeConditioned => format!("ours ({})", manifest.options.variant.as_str()),
        GeneratorKind::RandomBaseline => "random".to_string(),
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn analysis_value<T: Serialize>(r: Result<T, AnalysisError>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("reports serialize"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn oriented_map(seed: &SeedRun) -> HashMap<String, Comparison> {
    seed.comparisons
        .iter()
        .filter_map(|c| c.oriented().map(|o| (o.id.clone(), o)))
        .collect()
}

/// Sets of one model across seeds, first occurrence of each comparison.
fn pooled_sets(seeds: &[SeedRun], model: &str) -> Vec<ScoredExplanationSet> {
    let mut seen = BTreeSet::new();
    seeds
        .iter()
        .flat_map(|s| s.sets_for(model))
        .filter(|s| seen.insert(s.comparison_id.clone()))
        .cloned()
        .collect()
}

fn seed_summary(seed: &SeedRun) -> Value {
    let mut skipped: std::collections::BTreeMap<String, usize> = Default::default();
    for c in &seed.comparisons {
        if let ComparisonOutcome::Skipped(reason) = &c.outcome {
            let key = serde_json::to_value(reason).expect("serializes")["reason"]
                .as_str()
                .unwrap_or_default()
                .to_string();
            *skipped.entry(key).or_default() += 1;
        }
    }
    json!({
        "seed": seed.seed,
        "sampled": seed.comparisons.len(),
        "explained": seed.explained(),
        "skipped": skipped,
        "perturbations": seed.comparisons.iter().map(|c| c.perturbations.len()).sum::<usize>(),
        "generation_failures": seed.generation_failures.len(),
        "score_failures": seed.score_failures.len(),
    })
}

fn model_row(
    manifest: &RunManifest,
    seeds: &[SeedRun],
    model_id: &str,
    embedder: &dyn Embedder,
) -> Result<(TableRow, Vec<Value>), Error> {
    let mut row = TableRow {
        dataset: manifest.dataset.name.clone(),
        method: method_label(manifest),
        coverage: Vec::new(),
        distance: Vec::new(),
    };
    let mut per_seed = Vec::new();
    for seed in seeds {
        let sets: Vec<ScoredExplanationSet> = seed.sets_for(model_id).cloned().collect();
        if sets.is_empty() {
            per_seed.push(json!({ "seed": seed.seed, "explained": 0 }));
            continue;
        }
        let originals = oriented_map(seed);
        let cov = coverage(&sets)?;
        let dist = distance_report(&sets, &originals, embedder, DistanceOptions::default())?;
        per_seed.push(json!({ "seed": seed.seed, "coverage": cov, "distance": dist }));
        row.coverage.push(cov);
        row.distance.push(dist);
    }
    Ok((row, per_seed))
}

/// The coverage and distance table row of one model, one report per seed
/// that explained at least one comparison.
pub fn table_row(
    manifest: &RunManifest,
    seeds: &[SeedRun],
    model_id: &str,
    embedder: &dyn Embedder,
) -> Result<TableRow, Error> {
    let embedder = MemoEmbedder::new(embedder);
    Ok(model_row(manifest, seeds, model_id, &embedder)?.0)
}

/// Every report of a run. A pure function of the run's results and the
/// embeddings, so identical inputs give identical bytes.
pub fn build_reports(manifest: &RunManifest, seeds: &[SeedRun], embedder: &dyn Embedder) -> Result<ReportFiles, Error> {
    let embedder = MemoEmbedder::new(embedder);
    let options = DistanceOptions::default();
    let dataset = manifest.dataset.name.clone();
    let attribute_conditioned = manifest.options.generator == GeneratorKind::AttributeConditioned;
    let mut files = ReportFiles::new();
    let mut sensitivity: HashMap<(String, Side), SensitivityReport> = HashMap::new();
    let mut branch = serde_json::Map::new();

    for model in &manifest.models {
        let dir = model_dir(&model.id);
        let (row, per_seed) = model_row(manifest, seeds, &model.id, &embedder)?;
        let (coverage_csv, distance_csv) = emit_tables(&[row]);
        files.insert(format!("{dir}/coverage.csv"), coverage_csv);
        files.insert(format!("{dir}/distance.csv"), distance_csv);
        files.insert(format!("{dir}/metrics.json"), pretty(&per_seed));

        let pooled = pooled_sets(seeds, &model.id);
        let originals: HashMap<String, Comparison> = seeds.iter().flat_map(oriented_map).collect();
        if !pooled.is_empty() {
            let split = correctness_split(&pooled, &originals, &embedder, options);
            files.insert(format!("{dir}/correctness.json"), pretty(&analysis_value(split)));
        }
        if !attribute_conditioned || pooled.is_empty() {
            continue;
        }
        let plus = preference_flip_rate(&dataset, &pooled, Side::Chosen, &manifest.catalog)?;
        let minus = preference_flip_rate(&dataset, &pooled, Side::Rejected, &manifest.catalog)?;
        branch.insert(model.id.clone(), analysis_value(branch_correlation(&plus, &minus)));
        let reps = representative_single_model(&pooled, &plus.ranking(), &minus.ranking(), &manifest.catalog);
        files.insert(format!("{dir}/representatives.json"), pretty(&analysis_value(reps)));
        files.insert(
            format!("{dir}/sensitivity.json"),
            pretty(&json!({ "chosen": plus, "rejected": minus })),
        );
        sensitivity.insert((model.id.clone(), Side::Chosen), plus);
        sensitivity.insert((model.id.clone(), Side::Rejected), minus);
    }

    let mut summary = json!({
        "dataset": dataset,
        "method": method_label(manifest),
        "models": manifest.model_ids(),
        "seeds": seeds.iter().map(seed_summary).collect::<Vec<_>>(),
    });
    if attribute_conditioned && !sensitivity.is_empty() {
        let mut similarity = serde_json::Map::new();
        for side in Side::BOTH {
            let reports: Vec<SensitivityReport> = manifest
                .models
                .iter()
                .filter_map(|m| sensitivity.get(&(m.id.clone(), side)).cloned())
                .collect();
            files.insert(
                format!("sensitivity_{}.svg", side.as_str()),
                emit_sensitivity_chart(&format!("Preference flip rate, {dataset}, {side} side"), &reports),
            );
            if reports.len() >= 2 {
                similarity.insert(side.as_str().into(), analysis_value(cross_model_similarity(&reports)));
            }
        }
        summary["branch_correlation"] = Value::Object(branch);
        if !similarity.is_empty() {
            summary["similarity"] = Value::Object(similarity);
        }
        if let [a, b, ..] = manifest.models.as_slice() {
            let sets_a = pooled_sets(seeds, &a.id);
            let sets_b = pooled_sets(seeds, &b.id);
            let mut compare = serde_json::Map::new();
            for side in Side::BOTH {
                let (Some(ga), Some(gb)) = (
                    sensitivity.get(&(a.id.clone(), side)),
                    sensitivity.get(&(b.id.clone(), side)),
                ) else {
                    continue;
                };
                let r = representative_two_models(
                    &sets_a,
                    &sets_b,
                    side,
                    &ga.ranking(),
                    &gb.ranking(),
                    &manifest.catalog,
                );
                compare.insert(side.as_str().into(), analysis_value(r));
            }
            files.insert(
                "compare_models.json".into(),
                pretty(&json!({ "models": [a.id, b.id], "representatives": compare })),
            );
        }
    }
    files.insert("summary.json".into(), pretty(&summary));
    Ok(files)
}
