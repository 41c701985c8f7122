use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::manifest::RunManifest;
use crate::error::RunStoreError;
use crate::perturbation::GenerationFailure;
use crate::pipeline::{ComparisonOutcome, ComparisonRun, ScoreFailure, SeedRun};
use crate::types::{Comparison, ContrastLabel, Perturbation, RewardValue, ScoredExplanationSet, ScoredPerturbation};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARISONS_FILE: &str = "comparisons.jsonl";
pub const PERTURBATIONS_FILE: &str = "perturbations.jsonl";
pub const REWARDS_FILE: &str = "rewards.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const REPORTS_DIR: &str = "reports";

/// Report files keyed by their path relative to the reports directory.
pub type ReportFiles = BTreeMap<String, String>;

/// A complete run: its manifest, every seed's results and the reports
/// derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub seeds: Vec<SeedRun>,
    pub reports: ReportFiles,
}

#[derive(Serialize, Deserialize)]
struct ComparisonRow {
    seed: u64,
    comparison: Comparison,
    outcome: ComparisonOutcome,
}

#[derive(Serialize, Deserialize)]
struct PerturbationRow {
    seed: u64,
    comparison_id: String,
    index: usize,
    perturbation: Perturbation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RewardTarget {
    Chosen,
    Rejected,
    Perturbation(usize),
}

#[derive(Serialize, Deserialize)]
struct RewardRow {
    seed: u64,
    model_id: String,
    comparison_id: String,
    target: RewardTarget,
    reward: RewardValue,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    seed: u64,
    model_id: String,
    comparison_id: String,
    index: usize,
    label: ContrastLabel,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Failure {
    Generation(GenerationFailure),
    Score(ScoreFailure),
}

#[derive(Serialize, Deserialize)]
struct FailureRow {
    seed: u64,
    failure: Failure,
}

fn write_lines<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), RunStoreError> {
    let file = fs::File::create(path).map_err(|e| RunStoreError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(&row).expect("run rows serialize");
        writeln!(w, "{line}").map_err(|e| RunStoreError::io(path, e))?;
    }
    w.flush().map_err(|e| RunStoreError::io(path, e))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RunStoreError> {
    let file = fs::File::open(path).map_err(|e| RunStoreError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RunStoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| RunStoreError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn write_file(path: &Path, content: &str) -> Result<(), RunStoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| RunStoreError::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| RunStoreError::io(path, e))
}

/// Write the report files under `<dir>/reports`.
pub fn write_reports(dir: &Path, reports: &ReportFiles) -> Result<(), RunStoreError> {
    let root = dir.join(REPORTS_DIR);
    for (name, content) in reports {
        write_file(&root.join(name), content)?;
    }
    Ok(())
}

/// Read every file under `<dir>/reports`, keyed by relative path with `/`
/// separators.
pub fn read_reports(dir: &Path) -> Result<ReportFiles, RunStoreError> {
    fn walk(root: &Path, at: &Path, out: &mut ReportFiles) -> Result<(), RunStoreError> {
        let entries = fs::read_dir(at).map_err(|e| RunStoreError::io(at, e))?;
        for entry in entries {
            let path = entry.map_err(|e| RunStoreError::io(at, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("walk stays under root");
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                let content = fs::read_to_string(&path).map_err(|e| RunStoreError::io(&path, e))?;
                out.insert(key, content);
            }
        }
        Ok(())
    }
    let root = dir.join(REPORTS_DIR);
    let mut out = ReportFiles::new();
    if root.exists() {
        walk(&root, &root, &mut out)?;
    }
    Ok(out)
}

/// Write the run to `dir` as line-delimited files plus manifest and reports.
pub fn persist(record: &RunRecord, dir: &Path) -> Result<PathBuf, RunStoreError> {
    fs::create_dir_all(dir).map_err(|e| RunStoreError::io(dir, e))?;
    let manifest = serde_json::to_string_pretty(&record.manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), &(manifest + "\n"))?;

    let mut comparisons = Vec::new();
    let mut perturbations = Vec::new();
    let mut rewards = Vec::new();
    let mut labels = Vec::new();
    let mut failures = Vec::new();
    for seed in &record.seeds {
        let s = seed.seed;
        for run in &seed.comparisons {
            comparisons.push(ComparisonRow {
                seed: s,
                comparison: run.comparison.clone(),
                outcome: run.outcome.clone(),
            });
            for (index, p) in run.perturbations.iter().enumerate() {
                perturbations.push(PerturbationRow {
                    seed: s,
                    comparison_id: run.comparison.id.clone(),
                    index,
                    perturbation: p.clone(),
                });
            }
        }
        for set in &seed.sets {
            let run = seed
                .comparisons
                .iter()
                .find(|c| c.comparison.id == set.comparison_id)
                .ok_or_else(|| RunStoreError::Format {
                    path: dir.join(REWARDS_FILE),
                    line: 0,
                    message: format!("explanation set for unknown comparison `{}`", set.comparison_id),
                })?;
            let row = |target, reward: &RewardValue| RewardRow {
                seed: s,
                model_id: set.model_id.clone(),
                comparison_id: set.comparison_id.clone(),
                target,
                reward: reward.clone(),
            };
            rewards.push(row(RewardTarget::Chosen, &set.reward_chosen));
            rewards.push(row(RewardTarget::Rejected, &set.reward_rejected));
            // Entries follow perturbation order, so equal rewrites map to
            // successive indices.
            let mut cursor = 0;
            for e in &set.entries {
                let index = run.perturbations[cursor..]
                    .iter()
                    .position(|p| p == &e.perturbation)
                    .map(|i| cursor + i)
                    .ok_or_else(|| RunStoreError::Format {
                        path: dir.join(LABELS_FILE),
                        line: 0,
                        message: format!("scored perturbation missing from comparison `{}`", set.comparison_id),
                    })?;
                cursor = index + 1;
                rewards.push(row(RewardTarget::Perturbation(index), &e.reward));
                labels.push(LabelRow {
                    seed: s,
                    model_id: set.model_id.clone(),
                    comparison_id: set.comparison_id.clone(),
                    index,
                    label: e.label,
                });
            }
        }
        failures.extend(seed.generation_failures.iter().map(|f| FailureRow {
            seed: s,
            failure: Failure::Generation(f.clone()),
        }));
        failures.extend(seed.score_failures.iter().map(|f| FailureRow {
            seed: s,
            failure: Failure::Score(f.clone()),
        }));
    }
    write_lines(&dir.join(COMPARISONS_FILE), comparisons)?;
    write_lines(&dir.join(PERTURBATIONS_FILE), perturbations)?;
    write_lines(&dir.join(REWARDS_FILE), rewards)?;
    write_lines(&dir.join(LABELS_FILE), labels)?;
    write_lines(&dir.join(FAILURES_FILE), failures)?;
    write_reports(dir, &record.reports)?;
    Ok(dir.to_path_buf())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, RunStoreError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| RunStoreError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| RunStoreError::Format {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

/// Reconstruct a persisted run.
pub fn read_record(dir: &Path) -> Result<RunRecord, RunStoreError> {
    let manifest = read_manifest(dir)?;
    let comparisons: Vec<ComparisonRow> = read_lines(&dir.join(COMPARISONS_FILE))?;
    let perturbations: Vec<PerturbationRow> = read_lines(&dir.join(PERTURBATIONS_FILE))?;
    let rewards: Vec<RewardRow> = read_lines(&dir.join(REWARDS_FILE))?;
    let labels: Vec<LabelRow> = read_lines(&dir.join(LABELS_FILE))?;
    let failures: Vec<FailureRow> = read_lines(&dir.join(FAILURES_FILE))?;
    let format_err = |file: &str, message: String| RunStoreError::Format {
        path: dir.join(file),
        line: 0,
        message,
    };

    let mut seeds: Vec<SeedRun> = Vec::new();
    let seed_index = |seeds: &mut Vec<SeedRun>, seed: u64| -> usize {
        if let Some(i) = seeds.iter().position(|s| s.seed == seed) {
            return i;
        }
        seeds.push(SeedRun {
            seed,
            comparisons: Vec::new(),
            sets: Vec::new(),
            generation_failures: Vec::new(),
            score_failures: Vec::new(),
        });
        seeds.len() - 1
    };
    for row in comparisons {
        let i = seed_index(&mut seeds, row.seed);
        seeds[i].comparisons.push(ComparisonRun {
            comparison: row.comparison,
            outcome: row.outcome,
            perturbations: Vec::new(),
        });
    }
    for row in perturbations {
        let i = seed_index(&mut seeds, row.seed);
        let run = seeds[i]
            .comparisons
            .iter_mut()
            .find(|c| c.comparison.id == row.comparison_id)
            .ok_or_else(|| format_err(PERTURBATIONS_FILE, format!("unknown comparison `{}`", row.comparison_id)))?;
        if row.index != run.perturbations.len() {
            return Err(format_err(
                PERTURBATIONS_FILE,
                format!("comparison `{}`: perturbation index {} out of order", row.comparison_id, row.index),
            ));
        }
        run.perturbations.push(row.perturbation);
    }

    type Key = (u64, String, String);
    let mut reward_map: HashMap<Key, Vec<(RewardTarget, RewardValue)>> = HashMap::new();
    for row in rewards {
        reward_map
            .entry((row.seed, row.model_id, row.comparison_id))
            .or_default()
            .push((row.target, row.reward));
    }
    let mut label_map: HashMap<(Key, usize), ContrastLabel> = HashMap::new();
    for row in labels {
        label_map.insert(((row.seed, row.model_id, row.comparison_id), row.index), row.label);
    }
    let model_ids = manifest.model_ids();
    for seed in &mut seeds {
        for run in &seed.comparisons {
            let ComparisonOutcome::Explained {
                orientation_swapped, ..
            } = run.outcome
            else {
                continue;
            };
            for model in &model_ids {
                let key = (seed.seed, model.clone(), run.comparison.id.clone());
                let Some(rows) = reward_map.get(&key) else {
                    return Err(format_err(
                        REWARDS_FILE,
                        format!("no rewards for model `{model}` on comparison `{}`", run.comparison.id),
                    ));
                };
                let find = |t: RewardTarget| rows.iter().find(|(x, _)| *x == t).map(|(_, r)| r.clone());
                let (Some(reward_chosen), Some(reward_rejected)) = (find(RewardTarget::Chosen), find(RewardTarget::Rejected))
                else {
                    return Err(format_err(
                        REWARDS_FILE,
                        format!("missing original rewards for `{}`", run.comparison.id),
                    ));
                };
                let mut entries = Vec::new();
                for (index, p) in run.perturbations.iter().enumerate() {
                    let Some(reward) = find(RewardTarget::Perturbation(index)) else {
                        continue;
                    };
                    let label = *label_map
                        .get(&(key.clone(), index))
                        .ok_or_else(|| format_err(LABELS_FILE, format!("no label for `{}`#{index}", run.comparison.id)))?;
                    entries.push(ScoredPerturbation {
                        perturbation: p.clone(),
                        reward,
                        label,
                    });
                }
                seed.sets.push(ScoredExplanationSet {
                    comparison_id: run.comparison.id.clone(),
                    model_id: model.clone(),
                    reward_chosen,
                    reward_rejected,
                    orientation_swapped,
                    entries,
                });
            }
        }
    }
    for row in failures {
        let i = seed_index(&mut seeds, row.seed);
        match row.failure {
            Failure::Generation(f) => seeds[i].generation_failures.push(f),
            Failure::Score(f) => seeds[i].score_failures.push(f),
        }
    }
    let order: Vec<u64> = manifest.plan.seeds.clone();
    seeds.sort_by_key(|s| order.iter().position(|x| *x == s.seed).unwrap_or(usize::MAX));
    Ok(RunRecord {
        manifest,
        seeds,
        reports: read_reports(dir)?,
    })
}
