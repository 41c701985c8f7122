//! Preference dataset ingestion, filtering and seeded sampling.
//!
//! Two line-delimited JSON layouts are accepted:
//!
//! * `pairwise`: `{"prompt": .., "chosen": .., "rejected": ..}`
//! * `multi_aspect`: `{"prompt": .., "response_a": .., "response_b": ..,
//!   "scores_a": [..], "scores_b": [..]}`
//!
//! Comparison ids are `<dataset name>:<1-based line number>`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::error::DatasetError;
use crate::sampling::sample_indices;
use crate::types::{Comparison, GroundTruth};

/// Turn marker used by the HH-RLHF distribution.
pub const DEFAULT_TURN_DELIMITER: &str = "Human:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Pairwise,
    MultiAspect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub format: DatasetFormat,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_names: Option<Vec<String>>,
    /// Marker that opens a human turn inside the prompt field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_delimiter: Option<String>,
}

impl DatasetSpec {
    pub fn pairwise(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            name: name.into(),
            format: DatasetFormat::Pairwise,
            path: path.into(),
            aspect_names: None,
            turn_delimiter: None,
        }
    }

    pub fn multi_aspect(name: impl Into<String>, path: impl Into<PathBuf>, aspects: Vec<String>) -> Self {
        DatasetSpec {
            name: name.into(),
            format: DatasetFormat::MultiAspect,
            path: path.into(),
            aspect_names: Some(aspects),
            turn_delimiter: None,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.name.is_empty() {
            return Err(DatasetError::Spec("dataset name is empty".into()));
        }
        let is_multi = self.format == DatasetFormat::MultiAspect;
        if is_multi != self.aspect_names.is_some() {
            return Err(DatasetError::Spec(format!(
                "dataset `{}`: aspect_names must be given iff format is multi_aspect",
                self.name
            )));
        }
        Ok(())
    }

    fn turn_delimiter(&self) -> &str {
        self.turn_delimiter.as_deref().unwrap_or(DEFAULT_TURN_DELIMITER)
    }
}

/// Name → dataset mapping read from the `[datasets.<name>]` tables of a TOML
/// document. Relative paths resolve against the document's directory.
#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    datasets: BTreeMap<String, DatasetSpec>,
}

#[derive(Deserialize)]
struct RegistryDoc {
    #[serde(default)]
    datasets: BTreeMap<String, RegistryEntry>,
}

#[derive(Deserialize)]
struct RegistryEntry {
    format: DatasetFormat,
    path: PathBuf,
    #[serde(default)]
    aspect_names: Option<Vec<String>>,
    #[serde(default)]
    turn_delimiter: Option<String>,
}

impl DatasetRegistry {
    pub fn from_toml_file(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            DatasetError::Registry { message, .. } => DatasetError::Registry {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, DatasetError> {
        let doc: RegistryDoc = toml::from_str(text).map_err(|e| DatasetError::Registry {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        let mut datasets = BTreeMap::new();
        for (name, entry) in doc.datasets {
            let path = if entry.path.is_absolute() {
                entry.path
            } else {
                base_dir.join(entry.path)
            };
            let spec = DatasetSpec {
                name: name.clone(),
                format: entry.format,
                path,
                aspect_names: entry.aspect_names,
                turn_delimiter: entry.turn_delimiter,
            };
            spec.validate()?;
            datasets.insert(name, spec);
        }
        Ok(DatasetRegistry { datasets })
    }

    pub fn get(&self, name: &str) -> Option<&DatasetSpec> {
        self.datasets.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.datasets.keys().map(String::as_str)
    }
}

/// A record skipped during loading, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRecord {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub comparisons: Vec<Comparison>,
    pub dropped: Vec<DroppedRecord>,
}

#[derive(Deserialize)]
struct PairwiseRecord {
    prompt: String,
    chosen: String,
    rejected: String,
}

/// A multi-aspect record before the dominance filter is applied.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AspectRecord {
    #[serde(skip)]
    pub id: String,
    #[serde(skip)]
    pub line: usize,
    pub prompt: String,
    pub response_a: String,
    pub response_b: String,
    pub scores_a: Vec<f64>,
    pub scores_b: Vec<f64>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn is_multi_turn(prompt: &str, delimiter: &str) -> bool {
    !delimiter.is_empty() && prompt.matches(delimiter).count() > 1
}

/// Load a pairwise dataset. Every comparison gets `ground_truth =
/// chosen_preferred`; multi-turn prompts are dropped.
pub fn load_pairwise(spec: &DatasetSpec) -> Result<LoadedDataset, DatasetError> {
    spec.validate()?;
    if spec.format != DatasetFormat::Pairwise {
        return Err(DatasetError::Spec(format!("dataset `{}` is not pairwise", spec.name)));
    }
    let mut comparisons = Vec::new();
    let mut dropped = Vec::new();
    for (line, text) in read_lines(&spec.path)? {
        let rec: PairwiseRecord = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path: spec.path.clone(),
            line,
            message: e.to_string(),
        })?;
        if is_multi_turn(&rec.prompt, spec.turn_delimiter()) {
            debug!(dataset = %spec.name, line, "dropping multi-turn record");
            dropped.push(DroppedRecord {
                line,
                reason: "multi-turn prompt".into(),
            });
            continue;
        }
        match Comparison::new(format!("{}:{line}", spec.name), rec.prompt, rec.chosen, rec.rejected) {
            Ok(c) => comparisons.push(c.with_ground_truth(GroundTruth::ChosenPreferred)),
            Err(e) => {
                warn!(dataset = %spec.name, line, "dropping record: {}", e.message);
                dropped.push(DroppedRecord {
                    line,
                    reason: e.message,
                });
            }
        }
    }
    if comparisons.is_empty() {
        return Err(DatasetError::Empty(spec.name.clone()));
    }
    Ok(LoadedDataset { comparisons, dropped })
}

/// Read multi-aspect records without filtering.
pub fn read_aspect_records(spec: &DatasetSpec) -> Result<Vec<AspectRecord>, DatasetError> {
    spec.validate()?;
    if spec.format != DatasetFormat::MultiAspect {
        return Err(DatasetError::Spec(format!("dataset `{}` is not multi_aspect", spec.name)));
    }
    let dims = spec.aspect_names.as_ref().map(Vec::len);
    let mut out = Vec::new();
    for (line, text) in read_lines(&spec.path)? {
        let mut rec: AspectRecord = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path: spec.path.clone(),
            line,
            message: e.to_string(),
        })?;
        if let Some(d) = dims {
            if rec.scores_a.len() != d || rec.scores_b.len() != d {
                return Err(DatasetError::Schema {
                    path: spec.path.clone(),
                    line,
                    message: format!(
                        "expected {d} aspect scores, found {} and {}",
                        rec.scores_a.len(),
                        rec.scores_b.len()
                    ),
                });
            }
        }
        rec.id = format!("{}:{line}", spec.name);
        rec.line = line;
        out.push(rec);
    }
    Ok(out)
}

/// Keep records where one response strictly dominates the other on every
/// aspect. The dominating response becomes `chosen`.
pub fn filter_multi_aspect(records: &[AspectRecord]) -> Result<Vec<Comparison>, DatasetError> {
    let mut out = Vec::new();
    for rec in records {
        if rec.scores_a.len() != rec.scores_b.len() {
            return Err(DatasetError::Schema {
                path: PathBuf::new(),
                line: rec.line,
                message: format!(
                    "record {}: score vectors have lengths {} and {}",
                    rec.id,
                    rec.scores_a.len(),
                    rec.scores_b.len()
                ),
            });
        }
        let pairs = || rec.scores_a.iter().zip(&rec.scores_b);
        let a_dominates = pairs().all(|(a, b)| a > b);
        let b_dominates = pairs().all(|(a, b)| b > a);
        let (chosen, rejected, s_chosen, s_rejected) = if a_dominates && !rec.scores_a.is_empty() {
            (&rec.response_a, &rec.response_b, &rec.scores_a, &rec.scores_b)
        } else if b_dominates && !rec.scores_b.is_empty() {
            (&rec.response_b, &rec.response_a, &rec.scores_b, &rec.scores_a)
        } else {
            continue;
        };
        match Comparison::new(rec.id.clone(), rec.prompt.clone(), chosen.clone(), rejected.clone()) {
            Ok(c) => out.push(
                c.with_ground_truth(GroundTruth::ChosenPreferred)
                    .with_aspect_scores(s_chosen.clone(), s_rejected.clone())
                    .expect("equal lengths checked above"),
            ),
            Err(e) => warn!(record = %rec.id, "dropping record: {}", e.message),
        }
    }
    Ok(out)
}

/// Load a multi-aspect dataset, keep strictly dominated pairs and drop
/// multi-turn prompts.
pub fn load_multi_aspect(spec: &DatasetSpec) -> Result<LoadedDataset, DatasetError> {
    let records = read_aspect_records(spec)?;
    let mut dropped = Vec::new();
    let single_turn: Vec<AspectRecord> = records
        .into_iter()
        .filter(|r| {
            let multi = is_multi_turn(&r.prompt, spec.turn_delimiter());
            if multi {
                dropped.push(DroppedRecord {
                    line: r.line,
                    reason: "multi-turn prompt".into(),
                });
            }
            !multi
        })
        .collect();
    let comparisons = filter_multi_aspect(&single_turn)?;
    if comparisons.is_empty() {
        return Err(DatasetError::Empty(spec.name.clone()));
    }
    Ok(LoadedDataset { comparisons, dropped })
}

/// Load any dataset according to its format.
pub fn load(spec: &DatasetSpec) -> Result<LoadedDataset, DatasetError> {
    match spec.format {
        DatasetFormat::Pairwise => load_pairwise(spec),
        DatasetFormat::MultiAspect => load_multi_aspect(spec),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n_per_seed: usize,
    pub seeds: Vec<u64>,
}

impl SamplePlan {
    pub fn new(n_per_seed: usize, seeds: Vec<u64>) -> Result<Self, DatasetError> {
        let plan = SamplePlan { n_per_seed, seeds };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_per_seed == 0 {
            return Err(DatasetError::Spec("n_per_seed must be at least 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(DatasetError::Spec(format!("duplicate seed {s}")));
            }
        }
        Ok(())
    }
}

/// Draw one reproducible sample per seed (see [`crate::sampling`]).
pub fn sample(comparisons: &[Comparison], plan: &SamplePlan) -> Result<Vec<(u64, Vec<Comparison>)>, DatasetError> {
    plan.validate()?;
    if plan.n_per_seed > comparisons.len() {
        return Err(DatasetError::Sampling {
            requested: plan.n_per_seed,
            available: comparisons.len(),
        });
    }
    Ok(plan
        .seeds
        .iter()
        .map(|&seed| {
            let picked = sample_indices(comparisons.len(), plan.n_per_seed, seed)
                .into_iter()
                .map(|i| comparisons[i].clone())
                .collect();
            (seed, picked)
        })
        .collect())
}

/// Original-response rewards per (model, comparison): `(chosen, rejected)`.
#[derive(Debug, Clone, Default)]
pub struct RewardTable {
    rewards: HashMap<(String, String), (f64, f64)>,
}

impl RewardTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, comparison: &str, chosen: f64, rejected: f64) {
        self.rewards
            .insert((model.to_string(), comparison.to_string()), (chosen, rejected));
    }

    pub fn get(&self, model: &str, comparison: &str) -> Option<(f64, f64)> {
        self.rewards
            .get(&(model.to_string(), comparison.to_string()))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementOutcome {
    pub kept: Vec<Comparison>,
    /// Ids dropped because at least one model tied.
    pub dropped_ties: Vec<String>,
    /// Ids dropped because models ordered the responses differently.
    pub dropped_disagreements: Vec<String>,
}

/// Keep comparisons that every model orders the same way, strictly.
pub fn agreement_filter(
    comparisons: &[Comparison],
    models: &[String],
    rewards: &RewardTable,
) -> Result<AgreementOutcome, DatasetError> {
    let mut out = AgreementOutcome {
        kept: Vec::new(),
        dropped_ties: Vec::new(),
        dropped_disagreements: Vec::new(),
    };
    for c in comparisons {
        let mut orderings = Vec::with_capacity(models.len());
        for m in models {
            let (a, b) = rewards.get(m, &c.id).ok_or_else(|| DatasetError::MissingReward {
                model: m.clone(),
                comparison: c.id.clone(),
            })?;
            orderings.push(a.partial_cmp(&b));
        }
        if orderings
            .iter()
            .any(|o| !matches!(o, Some(std::cmp::Ordering::Less | std::cmp::Ordering::Greater)))
        {
            out.dropped_ties.push(c.id.clone());
        } else if orderings.windows(2).any(|w| w[0] != w[1]) {
            out.dropped_disagreements.push(c.id.clone());
        } else {
            out.kept.push(c.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn rec(p: &str, c: &str, r: &str) -> String {
        serde_json::json!({"prompt": p, "chosen": c, "rejected": r}).to_string()
    }

    #[test]
    fn loads_well_formed_records() {
        let body = [rec("q1", "a", "b"), rec("q2", "c", "d"), rec("q3", "e", "f")].join("\n");
        let f = write_tmp(&body);
        let spec = DatasetSpec::pairwise("hh", f.path());
        let out = load_pairwise(&spec).unwrap();
        assert_eq!(out.comparisons.len(), 3);
        assert_eq!(out.comparisons[1].id, "hh:2");
        assert!(out
            .comparisons
            .iter()
            .all(|c| c.ground_truth == Some(GroundTruth::ChosenPreferred)));
    }

    #[test]
    fn drops_multi_turn_prompts() {
        let body = [
            rec("Human: hi", "a", "b"),
            rec("\n\nHuman: hi\n\nAssistant: yo\n\nHuman: again", "c", "d"),
        ]
        .join("\n");
        let f = write_tmp(&body);
        let out = load_pairwise(&DatasetSpec::pairwise("hh", f.path())).unwrap();
        assert_eq!(out.comparisons.len(), 1);
        assert_eq!(out.dropped, vec![DroppedRecord { line: 2, reason: "multi-turn prompt".into() }]);
    }

    #[test]
    fn truncated_line_names_line_number() {
        let body = format!("{}\n{}\n{{\"prompt\": \"q\", \"cho", rec("q", "a", "b"), rec("q", "c", "d"));
        let f = write_tmp(&body);
        match load_pairwise(&DatasetSpec::pairwise("hh", f.path())) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let f = write_tmp(&rec("q", "same", "same"));
        assert!(matches!(
            load_pairwise(&DatasetSpec::pairwise("hh", f.path())),
            Err(DatasetError::Empty(_))
        ));
    }

    fn aspect(a: &[f64], b: &[f64]) -> AspectRecord {
        AspectRecord {
            id: "hs2:1".into(),
            line: 1,
            prompt: "q".into(),
            response_a: "A".into(),
            response_b: "B".into(),
            scores_a: a.to_vec(),
            scores_b: b.to_vec(),
        }
    }

    #[test]
    fn strict_dominance_filter() {
        let kept = filter_multi_aspect(&[aspect(&[5., 4., 4., 3., 4.], &[4., 3., 3., 2., 3.])]).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].chosen, "A");
        assert_eq!(kept[0].aspect_scores.as_ref().unwrap().0, vec![5., 4., 4., 3., 4.]);

        assert!(filter_multi_aspect(&[aspect(&[5., 4., 4., 3., 4.], &[4., 4., 3., 2., 3.])])
            .unwrap()
            .is_empty());
        assert!(filter_multi_aspect(&[aspect(&[5., 1.], &[1., 5.])]).unwrap().is_empty());
        assert!(matches!(
            filter_multi_aspect(&[aspect(&[1.0], &[1.0, 2.0])]),
            Err(DatasetError::Schema { .. })
        ));
    }

    #[test]
    fn dominance_is_order_invariant() {
        let r = aspect(&[3., 3.], &[1., 2.]);
        let mut swapped = r.clone();
        std::mem::swap(&mut swapped.response_a, &mut swapped.response_b);
        std::mem::swap(&mut swapped.scores_a, &mut swapped.scores_b);
        let x = filter_multi_aspect(&[r]).unwrap();
        let y = filter_multi_aspect(&[swapped]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn multi_aspect_file_checks_declared_dimensions() {
        let line = serde_json::json!({
            "prompt": "q", "response_a": "A", "response_b": "B",
            "scores_a": [3, 3], "scores_b": [1, 1]
        })
        .to_string();
        let f = write_tmp(&line);
        let spec = DatasetSpec::multi_aspect("hs2", f.path(), vec!["h".into(), "c".into(), "x".into()]);
        assert!(matches!(load_multi_aspect(&spec), Err(DatasetError::Schema { line: 1, .. })));
        let spec = DatasetSpec::multi_aspect("hs2", f.path(), vec!["h".into(), "c".into()]);
        assert_eq!(load_multi_aspect(&spec).unwrap().comparisons.len(), 1);
    }

    fn population(n: usize) -> Vec<Comparison> {
        (0..n)
            .map(|i| Comparison::new(format!("d:{i}"), "q", format!("a{i}"), format!("b{i}")).unwrap())
            .collect()
    }

    #[test]
    fn sample_full_population_is_permutation() {
        let pop = population(10);
        let out = sample(&pop, &SamplePlan::new(10, vec![77]).unwrap()).unwrap();
        let mut ids: Vec<_> = out[0].1.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        let mut expected: Vec<_> = pop.iter().map(|c| c.id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn sample_is_deterministic_and_checks_size() {
        let pop = population(20);
        let plan = SamplePlan::new(5, vec![1, 2, 3]).unwrap();
        let a = sample(&pop, &plan).unwrap();
        let b = sample(&pop, &plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|(_, s)| s.len() == 5));
        assert!(matches!(
            sample(&pop, &SamplePlan { n_per_seed: 21, seeds: vec![1] }),
            Err(DatasetError::Sampling { .. })
        ));
        assert!(SamplePlan::new(1, vec![4, 4]).is_err());
        assert!(SamplePlan::new(0, vec![4]).is_err());
    }

    #[test]
    fn agreement_filter_cases() {
        let pop = population(3);
        let models = vec!["a".to_string(), "b".to_string()];
        let mut t = RewardTable::new();
        t.insert("a", "d:0", 2.0, 1.0);
        t.insert("b", "d:0", 5.0, 1.0);
        t.insert("a", "d:1", 2.0, 1.0);
        t.insert("b", "d:1", 0.0, 1.0);
        t.insert("a", "d:2", 1.0, 1.0);
        t.insert("b", "d:2", 3.0, 1.0);
        let out = agreement_filter(&pop, &models, &t).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "d:0");
        assert_eq!(out.dropped_disagreements, vec!["d:1".to_string()]);
        assert_eq!(out.dropped_ties, vec!["d:2".to_string()]);

        let mut missing = RewardTable::new();
        missing.insert("a", "d:0", 1.0, 0.0);
        match agreement_filter(&pop[..1], &models, &missing) {
            Err(DatasetError::MissingReward { model, comparison }) => {
                assert_eq!(model, "b");
                assert_eq!(comparison, "d:0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn registry_resolves_relative_paths() {
        let doc = r#"
            [datasets.toy]
            format = "pairwise"
            path = "toy.jsonl"

            [datasets.hs2]
            format = "multi_aspect"
            path = "/data/hs2.jsonl"
            aspect_names = ["helpfulness", "correctness"]
        "#;
        let reg = DatasetRegistry::from_toml_str(doc, Path::new("/base")).unwrap();
        assert_eq!(reg.get("toy").unwrap().path, PathBuf::from("/base/toy.jsonl"));
        assert_eq!(reg.get("hs2").unwrap().format, DatasetFormat::MultiAspect);
        let bad = "[datasets.x]\nformat = \"multi_aspect\"\npath = \"x\"\n";
        assert!(DatasetRegistry::from_toml_str(bad, Path::new("/")).is_err());
    }
}
