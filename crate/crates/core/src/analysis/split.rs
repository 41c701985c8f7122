use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AnalysisError, InvalidInput};
use crate::metrics::{coverage, distance_report, CoverageReport, DistanceOptions, DistanceReport, Embedder};
use crate::types::{Comparison, GroundTruth, ScoredExplanationSet};

/// Coverage and distances of one group of explanation sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub size: usize,
    pub coverage: CoverageReport,
    pub distance: DistanceReport,
}

impl MetricBundle {
    pub fn compute(
        sets: &[ScoredExplanationSet],
        originals: &HashMap<String, Comparison>,
        embedder: &dyn Embedder,
        options: DistanceOptions,
    ) -> Result<Option<Self>, AnalysisError> {
        if sets.is_empty() {
            return Ok(None);
        }
        Ok(Some(MetricBundle {
            size: sets.len(),
            coverage: coverage(sets)?,
            distance: distance_report(sets, originals, embedder, options)?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessSplit {
    pub correct_ids: Vec<String>,
    pub wrong_ids: Vec<String>,
    /// Absent when the group is empty.
    pub correct: Option<MetricBundle>,
    pub wrong: Option<MetricBundle>,
    /// Sets left out for lack of ground truth.
    pub excluded: usize,
}

/// Whether the model's original preference agreed with the label, judged on
/// the oriented comparison: correct iff the label prefers the side the model
/// scored higher.
pub fn preference_correct(oriented: &Comparison) -> Option<bool> {
    oriented.ground_truth.map(|g| g == GroundTruth::ChosenPreferred)
}

/// Split explanation sets by whether the model's preference matched the
/// ground truth and compute the metrics of each group. `originals` holds the
/// oriented comparisons.
pub fn correctness_split(
    sets: &[ScoredExplanationSet],
    originals: &HashMap<String, Comparison>,
    embedder: &dyn Embedder,
    options: DistanceOptions,
) -> Result<CorrectnessSplit, AnalysisError> {
    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    let mut excluded = 0;
    for set in sets {
        let c = originals.get(&set.comparison_id).ok_or_else(|| {
            InvalidInput::new(format!("no comparison for explanation set `{}`", set.comparison_id))
        })?;
        match preference_correct(c) {
            Some(true) => correct.push(set.clone()),
            Some(false) => wrong.push(set.clone()),
            None => excluded += 1,
        }
    }
    Ok(CorrectnessSplit {
        correct_ids: correct.iter().map(|s| s.comparison_id.clone()).collect(),
        wrong_ids: wrong.iter().map(|s| s.comparison_id.clone()).collect(),
        correct: MetricBundle::compute(&correct, originals, embedder, options)?,
        wrong: MetricBundle::compute(&wrong, originals, embedder, options)?,
        excluded,
    })
}

/// Share of pairs `(original reward, perturbed reward)` where the perturbed
/// text scored strictly higher.
pub fn win_rate(pairs: &[(f64, f64)]) -> Result<f64, InvalidInput> {
    if pairs.is_empty() {
        return Err(InvalidInput::new("win rate of an empty list"));
    }
    let wins = pairs.iter().filter(|(orig, pert)| pert > orig).count();
    Ok(wins as f64 / pairs.len() as f64)
}
