use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::sensitivity::{ranking_tau_on_shared, AttributeRanking};
use crate::catalog::AttributeCatalog;
use crate::error::AnalysisError;
use crate::types::{ScoredExplanationSet, Side};

/// Attributes of one comparison side ranked by how far their rewrite pushed
/// the reward against the model's preference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRanking {
    pub comparison_id: String,
    pub side: Side,
    pub ranking: AttributeRanking,
    /// Catalog attributes without a scored rewrite on this side.
    pub excluded: Vec<String>,
}

/// Opposing reward difference of every attribute-conditioned rewrite of
/// `side`: `r(y-) - r(y+')` for the chosen side, `r(y-') - r(y+)` for the
/// rejected side.
pub fn local_ranking(
    set: &ScoredExplanationSet,
    side: Side,
    catalog: &AttributeCatalog,
) -> Result<LocalRanking, AnalysisError> {
    let mut diffs: BTreeMap<String, f64> = BTreeMap::new();
    for e in set.side_entries(side) {
        let Some(attribute) = &e.perturbation.attribute else {
            continue;
        };
        let diff = match side {
            Side::Chosen => set.reward_rejected.scalar - e.reward.scalar,
            Side::Rejected => e.reward.scalar - set.reward_chosen.scalar,
        };
        diffs.entry(attribute.clone()).or_insert(diff);
    }
    if diffs.len() < 2 {
        return Err(AnalysisError::TooFew {
            what: "scored attributes",
            needed: 2,
            found: diffs.len(),
        });
    }
    let excluded = catalog
        .names()
        .filter(|n| !diffs.contains_key(*n))
        .map(str::to_string)
        .collect();
    Ok(LocalRanking {
        comparison_id: set.comparison_id.clone(),
        side,
        ranking: AttributeRanking::new(diffs)?,
        excluded,
    })
}

/// A comparison's local-to-global agreement score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeScore {
    pub comparison_id: String,
    pub score: f64,
    /// The two τ values summed into `score`.
    pub taus: [f64; 2],
}

fn rank_scores(mut scores: Vec<RepresentativeScore>) -> Vec<RepresentativeScore> {
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.comparison_id.cmp(&b.comparison_id))
    });
    scores
}

fn local_tau(
    set: &ScoredExplanationSet,
    side: Side,
    global: &AttributeRanking,
    catalog: &AttributeCatalog,
) -> Result<Option<f64>, AnalysisError> {
    let local = match local_ranking(set, side, catalog) {
        Ok(l) => l,
        Err(AnalysisError::TooFew { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    match ranking_tau_on_shared(&local.ranking, global) {
        Ok(t) => Ok(Some(t)),
        Err(AnalysisError::UndefinedCorrelation(_) | AnalysisError::TooFew { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Comparisons of one model ranked by `τ(local+, global+) + τ(local-, global-)`,
/// best first, ties by comparison id. Comparisons where either τ is
/// undefined are skipped.
pub fn representative_single_model(
    sets: &[ScoredExplanationSet],
    global_plus: &AttributeRanking,
    global_minus: &AttributeRanking,
    catalog: &AttributeCatalog,
) -> Result<Vec<RepresentativeScore>, AnalysisError> {
    let mut scores = Vec::new();
    for set in sets {
        let plus = local_tau(set, Side::Chosen, global_plus, catalog)?;
        let minus = local_tau(set, Side::Rejected, global_minus, catalog)?;
        if let (Some(p), Some(m)) = (plus, minus) {
            scores.push(RepresentativeScore {
                comparison_id: set.comparison_id.clone(),
                score: p + m,
                taus: [p, m],
            });
        }
    }
    Ok(rank_scores(scores))
}

fn side_texts(set: &ScoredExplanationSet, side: Side) -> BTreeMap<Option<&str>, Vec<&str>> {
    let mut out: BTreeMap<Option<&str>, Vec<&str>> = BTreeMap::new();
    for e in set.side_entries(side) {
        out.entry(e.perturbation.attribute.as_deref())
            .or_default()
            .push(e.perturbation.text.as_str());
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

/// Comparisons ranked by `τ(local_a, global_a) + τ(local_b, global_b)` on one
/// side, for two models that scored the same rewrites.
pub fn representative_two_models(
    sets_a: &[ScoredExplanationSet],
    sets_b: &[ScoredExplanationSet],
    side: Side,
    global_a: &AttributeRanking,
    global_b: &AttributeRanking,
    catalog: &AttributeCatalog,
) -> Result<Vec<RepresentativeScore>, AnalysisError> {
    let by_id: HashMap<&str, &ScoredExplanationSet> =
        sets_b.iter().map(|s| (s.comparison_id.as_str(), s)).collect();
    if by_id.len() != sets_a.len() {
        return Err(AnalysisError::Alignment(format!(
            "model a has {} explanation sets, model b has {}",
            sets_a.len(),
            by_id.len()
        )));
    }
    let mut scores = Vec::new();
    for a in sets_a {
        let b = by_id.get(a.comparison_id.as_str()).ok_or_else(|| {
            AnalysisError::Alignment(format!("comparison `{}` has no scores from model b", a.comparison_id))
        })?;
        if side_texts(a, side) != side_texts(b, side) {
            return Err(AnalysisError::Alignment(format!(
                "comparison `{}`: the models scored different rewrites",
                a.comparison_id
            )));
        }
        let ta = local_tau(a, side, global_a, catalog)?;
        let tb = local_tau(b, side, global_b, catalog)?;
        if let (Some(x), Some(y)) = (ta, tb) {
            scores.push(RepresentativeScore {
                comparison_id: a.comparison_id.clone(),
                score: x + y,
                taus: [x, y],
            });
        }
    }
    Ok(rank_scores(scores))
}
