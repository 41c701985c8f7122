use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use tracing::info;

use super::kendall::kendall_tau;
use crate::catalog::AttributeCatalog;
use crate::error::{AnalysisError, InvalidInput};
use crate::types::{ContrastLabel, ScoredExplanationSet, Side};

/// Attributes ordered by a key, highest first; equal keys ordered by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributeRanking {
    entries: Vec<(String, f64)>,
}

impl AttributeRanking {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self, InvalidInput> {
        let mut entries: Vec<(String, f64)> = entries.into_iter().collect();
        let mut seen = BTreeSet::new();
        for (name, key) in &entries {
            if key.is_nan() {
                return Err(InvalidInput::new(format!("ranking key for `{name}` is not a number")));
            }
            if !seen.insert(name.as_str()) {
                return Err(InvalidInput::new(format!("attribute `{name}` ranked twice")));
            }
        }
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
        Ok(AttributeRanking { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|(a, _)| a.as_str()).collect()
    }

    pub fn key(&self, attribute: &str) -> Option<f64> {
        self.entries.iter().find(|(a, _)| a == attribute).map(|(_, k)| *k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn attributes(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|(a, _)| a.as_str()).collect()
    }
}

/// τ_b between two rankings over exactly the same attributes.
pub fn ranking_tau(a: &AttributeRanking, b: &AttributeRanking) -> Result<f64, AnalysisError> {
    if a.attributes() != b.attributes() {
        return Err(AnalysisError::AttributeMismatch(format!(
            "{:?} vs {:?}",
            a.attributes(),
            b.attributes()
        )));
    }
    ranking_tau_on_shared(a, b)
}

/// τ_b restricted to the attributes both rankings contain.
pub fn ranking_tau_on_shared(a: &AttributeRanking, b: &AttributeRanking) -> Result<f64, AnalysisError> {
    let keys_b: HashMap<&str, f64> = b.entries.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let (u, v): (Vec<f64>, Vec<f64>) = a
        .entries
        .iter()
        .filter_map(|(n, k)| keys_b.get(n.as_str()).map(|kb| (*k, *kb)))
        .unzip();
    kendall_tau(&u, &v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSensitivity {
    pub attribute: String,
    pub flips: usize,
    /// Comparisons with a scored perturbation for this attribute.
    pub denominator: usize,
    /// Comparisons whose rewrite for this attribute is missing.
    pub missing: usize,
    /// Absent when no comparison has a scored perturbation.
    pub pfr: Option<f64>,
}

/// Preference flip rate of every catalog attribute for one model, dataset
/// and side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub model_id: String,
    pub dataset: String,
    pub side: Side,
    pub attributes: Vec<AttributeSensitivity>,
}

impl SensitivityReport {
    pub fn pfr(&self, attribute: &str) -> Option<f64> {
        self.attributes.iter().find(|a| a.attribute == attribute).and_then(|a| a.pfr)
    }

    /// Ranking over attributes with a defined flip rate.
    pub fn ranking(&self) -> AttributeRanking {
        AttributeRanking::new(
            self.attributes
                .iter()
                .filter_map(|a| a.pfr.map(|p| (a.attribute.clone(), p))),
        )
        .expect("flip rates are finite and attributes unique")
    }
}

fn single_model(sets: &[ScoredExplanationSet]) -> Result<String, AnalysisError> {
    let first = sets.first().ok_or(AnalysisError::TooFew {
        what: "explanation sets",
        needed: 1,
        found: 0,
    })?;
    if let Some(other) = sets.iter().find(|s| s.model_id != first.model_id) {
        return Err(InvalidInput::new(format!(
            "explanation sets mix models `{}` and `{}`",
            first.model_id, other.model_id
        ))
        .into());
    }
    Ok(first.model_id.clone())
}

/// Per attribute: the share of comparisons whose rewrite of `side` for that
/// attribute flipped the preference. Comparisons without a scored rewrite
/// for an attribute are left out of that attribute's denominator.
pub fn preference_flip_rate(
    dataset: &str,
    sets: &[ScoredExplanationSet],
    side: Side,
    catalog: &AttributeCatalog,
) -> Result<SensitivityReport, AnalysisError> {
    let model_id = single_model(sets)?;
    let attributes = catalog
        .names()
        .map(|name| {
            let mut flips = 0;
            let mut denominator = 0;
            for set in sets {
                let mut scored = set
                    .side_entries(side)
                    .filter(|e| e.perturbation.attribute.as_deref() == Some(name))
                    .peekable();
                if scored.peek().is_none() {
                    continue;
                }
                denominator += 1;
                if scored.any(|e| e.label == ContrastLabel::Counterfactual) {
                    flips += 1;
                }
            }
            AttributeSensitivity {
                attribute: name.to_string(),
                flips,
                denominator,
                missing: sets.len() - denominator,
                pfr: (denominator > 0).then(|| flips as f64 / denominator as f64),
            }
        })
        .collect();
    Ok(SensitivityReport {
        model_id,
        dataset: dataset.to_string(),
        side,
        attributes,
    })
}

/// Pairwise τ between models' flip-rate rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub models: Vec<String>,
    /// Attributes the correlations were computed over.
    pub attributes: Vec<String>,
    /// `None` where the correlation is undefined.
    pub tau: Vec<Vec<Option<f64>>>,
}

impl SimilarityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.models.iter().position(|m| m == a)?;
        let j = self.models.iter().position(|m| m == b)?;
        self.tau[i][j]
    }
}

/// Kendall τ between every pair of models' flip-rate rankings, over the
/// attributes every report defines.
pub fn cross_model_similarity(reports: &[SensitivityReport]) -> Result<SimilarityMatrix, AnalysisError> {
    if reports.len() < 2 {
        return Err(AnalysisError::TooFew {
            what: "models",
            needed: 2,
            found: reports.len(),
        });
    }
    let rankings: Vec<AttributeRanking> = reports.iter().map(SensitivityReport::ranking).collect();
    let mut shared: BTreeSet<&str> = rankings[0].attributes();
    for r in &rankings[1..] {
        let attrs = r.attributes();
        if attrs != shared {
            info!("flip-rate reports cover different attributes; using their intersection");
        }
        shared = shared.intersection(&attrs).copied().collect();
    }
    if shared.len() < 2 {
        return Err(AnalysisError::TooFew {
            what: "shared attributes",
            needed: 2,
            found: shared.len(),
        });
    }
    let restricted: Vec<AttributeRanking> = rankings
        .iter()
        .map(|r| {
            AttributeRanking::new(
                r.entries()
                    .iter()
                    .filter(|(a, _)| shared.contains(a.as_str()))
                    .cloned(),
            )
            .expect("subset of a valid ranking")
        })
        .collect();
    let n = reports.len();
    let mut tau = vec![vec![None; n]; n];
    for i in 0..n {
        tau[i][i] = Some(1.0);
        for j in i + 1..n {
            let t = match ranking_tau(&restricted[i], &restricted[j]) {
                Ok(t) => Some(t),
                Err(AnalysisError::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            };
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    Ok(SimilarityMatrix {
        models: reports.iter().map(|r| r.model_id.clone()).collect(),
        attributes: shared.into_iter().map(str::to_string).collect(),
        tau,
    })
}

/// τ between the chosen-side and rejected-side flip-rate rankings of one
/// model, over the attributes both define.
pub fn branch_correlation(plus: &SensitivityReport, minus: &SensitivityReport) -> Result<f64, AnalysisError> {
    if plus.model_id != minus.model_id || plus.dataset != minus.dataset {
        return Err(InvalidInput::new(format!(
            "branch correlation needs one model and dataset, got {}/{} and {}/{}",
            plus.model_id, plus.dataset, minus.model_id, minus.dataset
        ))
        .into());
    }
    ranking_tau_on_shared(&plus.ranking(), &minus.ranking())
}
