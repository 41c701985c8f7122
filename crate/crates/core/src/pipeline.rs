//! End-to-end explanation of sampled comparisons: score the originals, keep
//! the comparisons every model strictly orders the same way, orient them by
//! the first model, generate rewrites, score the rewrites under every model
//! and label them.

use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::catalog::AttributeCatalog;
use crate::contrast::{categorize_perturbation, orient_comparison};
use crate::dataset::{agreement_filter, RewardTable};
use crate::error::{Error, GatewayError};
use crate::exec::bounded_map;
use crate::gateway::{EndpointConfig, Gateway, ScalarisationSpec};
use crate::perturbation::{GeneratedSets, GenerationFailure, Generator, OriginalRewards, TemplateSet};
use crate::types::{
    Comparison, GeneratorKind, Perturbation, PromptVariant, RewardValue, ScoredExplanationSet, ScoredPerturbation,
    Side,
};

/// A reward model under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub id: String,
    pub endpoint: EndpointConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalarisation: Option<ScalarisationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub variant: PromptVariant,
    pub generator: GeneratorKind,
    /// Rewrites per side for the random baseline.
    pub random_per_side: usize,
    pub parallelism: usize,
    #[serde(default)]
    pub fixture_markers: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            variant: PromptVariant::Center,
            generator: GeneratorKind::AttributeConditioned,
            random_per_side: 15,
            parallelism: 4,
            fixture_markers: false,
        }
    }
}

impl PipelineOptions {
    /// Endpoint calls needed to explain `comparisons` comparisons, assuming
    /// none is dropped.
    pub fn planned_requests(&self, comparisons: usize, models: usize, catalog_len: usize) -> u64 {
        let (n, m, k) = (comparisons as u64, models as u64, catalog_len as u64);
        let per = match self.generator {
            GeneratorKind::AttributeConditioned => 2 * m + 2 + 2 * k + 2 * k * m,
            GeneratorKind::RandomBaseline => {
                let r = self.random_per_side as u64;
                2 * m + 2 * r + 2 * r * m
            }
        };
        n * per
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum SkipReason {
    /// Some model scored both responses equally.
    Tie,
    /// Models ordered the responses differently.
    Disagreement,
    /// An original response could not be scored.
    ScoringFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ComparisonOutcome {
    Explained {
        orientation_swapped: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        step1_fallbacks: Vec<Side>,
    },
    Skipped(SkipReason),
}

/// One sampled comparison and what happened to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRun {
    /// As sampled, before orientation.
    pub comparison: Comparison,
    pub outcome: ComparisonOutcome,
    /// Generated rewrites, chosen side first, in the oriented frame.
    pub perturbations: Vec<Perturbation>,
}

impl ComparisonRun {
    /// The comparison with the first model's preferred response as chosen.
    pub fn oriented(&self) -> Option<Comparison> {
        match self.outcome {
            ComparisonOutcome::Explained {
                orientation_swapped, ..
            } => Some(if orientation_swapped {
                self.comparison.swapped()
            } else {
                self.comparison.clone()
            }),
            ComparisonOutcome::Skipped(_) => None,
        }
    }
}

/// A scoring call that failed; `index` points into the comparison's
/// perturbations, `None` for the originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub comparison_id: String,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub message: String,
    #[serde(default)]
    pub transport: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub comparisons: Vec<ComparisonRun>,
    /// Comparison order, then model order.
    pub sets: Vec<ScoredExplanationSet>,
    pub generation_failures: Vec<GenerationFailure>,
    pub score_failures: Vec<ScoreFailure>,
}

impl SeedRun {
    pub fn sets_for<'a>(&'a self, model_id: &'a str) -> impl Iterator<Item = &'a ScoredExplanationSet> + 'a {
        self.sets.iter().filter(move |s| s.model_id == model_id)
    }

    pub fn explained(&self) -> usize {
        self.comparisons
            .iter()
            .filter(|c| matches!(c.outcome, ComparisonOutcome::Explained { .. }))
            .count()
    }

    /// Failures caused by an unreachable endpoint or a cache miss.
    pub fn transport_failures(&self) -> usize {
        self.generation_failures.iter().filter(|f| f.transport).count()
            + self.score_failures.iter().filter(|f| f.transport).count()
    }
}

pub struct Pipeline<'a> {
    pub gateway: &'a Gateway,
    pub chat: &'a EndpointConfig,
    pub models: &'a [RewardModel],
    pub catalog: &'a AttributeCatalog,
    pub templates: &'a TemplateSet,
    pub options: &'a PipelineOptions,
}

struct Explained {
    run: ComparisonRun,
    sets: Vec<ScoredExplanationSet>,
    generation_failures: Vec<GenerationFailure>,
    score_failures: Vec<ScoreFailure>,
}

impl<'a> Pipeline<'a> {
    fn generator(&self) -> Generator<'_> {
        Generator {
            gateway: self.gateway,
            chat: self.chat,
            templates: self.templates,
            fixture_markers: self.options.fixture_markers,
            parallelism: self.options.parallelism.max(1),
        }
    }

    fn score_failure(c: &str, model: &str, index: Option<usize>, err: &GatewayError) -> ScoreFailure {
        ScoreFailure {
            comparison_id: c.to_string(),
            model_id: model.to_string(),
            index,
            message: err.to_string(),
            transport: err.is_transport(),
        }
    }

    fn score_originals(&self, c: &Comparison) -> Result<Vec<(RewardValue, RewardValue)>, ScoreFailure> {
        self.models
            .iter()
            .map(|m| {
                let score = |side| {
                    self.gateway
                        .score(&m.endpoint, m.scalarisation.as_ref(), &c.prompt, c.response(side))
                        .map_err(|e| Self::score_failure(&c.id, &m.id, None, &e))
                };
                Ok((score(Side::Chosen)?, score(Side::Rejected)?))
            })
            .collect()
    }

    fn generate(&self, oriented: &Comparison, rewards: OriginalRewards) -> Result<GeneratedSets, Error> {
        let generator = self.generator();
        match self.options.generator {
            GeneratorKind::AttributeConditioned => Ok(generator.generate_perturbation_sets(
                oriented,
                rewards,
                self.catalog,
                self.options.variant,
            )),
            GeneratorKind::RandomBaseline => Ok(generator.generate_random_baseline(
                oriented,
                self.options.random_per_side,
                self.options.variant,
            )?),
        }
    }

    fn explain_one(
        &self,
        sampled: &Comparison,
        originals: &[(RewardValue, RewardValue)],
    ) -> Result<Explained, Error> {
        let (first_chosen, first_rejected) = &originals[0];
        let (oriented, swapped) = orient_comparison(sampled, first_chosen.scalar, first_rejected.scalar)?;
        let oriented_rewards: Vec<(RewardValue, RewardValue)> = originals
            .iter()
            .map(|(c, r)| if swapped { (r.clone(), c.clone()) } else { (c.clone(), r.clone()) })
            .collect();
        let rewards = OriginalRewards {
            chosen: oriented_rewards[0].0.scalar,
            rejected: oriented_rewards[0].1.scalar,
        };
        let generated = self.generate(&oriented, rewards)?;
        let perturbations: Vec<Perturbation> = generated.all().cloned().collect();
        let mut sets = Vec::with_capacity(self.models.len());
        let mut score_failures = Vec::new();
        for (model, (rc, rr)) in self.models.iter().zip(&oriented_rewards) {
            let indexed: Vec<(usize, &Perturbation)> = perturbations.iter().enumerate().collect();
            let scored = bounded_map(&indexed, self.options.parallelism.max(1), |(i, p)| {
                self.gateway
                    .score(&model.endpoint, model.scalarisation.as_ref(), &oriented.prompt, &p.text)
                    .map_err(|e| Self::score_failure(&oriented.id, &model.id, Some(*i), &e))
            });
            let mut entries = Vec::new();
            for ((i, p), r) in indexed.iter().zip(scored) {
                let reward = match r {
                    Ok(r) => r,
                    Err(f) => {
                        score_failures.push(f);
                        continue;
                    }
                };
                let other = match p.side {
                    Side::Chosen => rr.scalar,
                    Side::Rejected => rc.scalar,
                };
                match categorize_perturbation(p.side, other, reward.scalar) {
                    Ok(label) => entries.push(ScoredPerturbation {
                        perturbation: (*p).clone(),
                        reward,
                        label,
                    }),
                    Err(e) => score_failures.push(ScoreFailure {
                        comparison_id: oriented.id.clone(),
                        model_id: model.id.clone(),
                        index: Some(*i),
                        message: e.to_string(),
                        transport: false,
                    }),
                }
            }
            sets.push(ScoredExplanationSet {
                comparison_id: oriented.id.clone(),
                model_id: model.id.clone(),
                reward_chosen: rc.clone(),
                reward_rejected: rr.clone(),
                orientation_swapped: swapped,
                entries,
            });
        }
        Ok(Explained {
            run: ComparisonRun {
                comparison: sampled.clone(),
                outcome: ComparisonOutcome::Explained {
                    orientation_swapped: swapped,
                    step1_fallbacks: generated.step1_fallbacks.clone(),
                },
                perturbations,
            },
            sets,
            generation_failures: generated.failures,
            score_failures,
        })
    }

    /// Explain one seed's sample. Gateway failures of individual calls are
    /// recorded in the result; configuration errors abort.
    pub fn run_seed(&self, seed: u64, sampled: &[Comparison]) -> Result<SeedRun, Error> {
        if self.models.is_empty() {
            return Err(Error::Config("at least one reward model is required".into()));
        }
        let parallelism = self.options.parallelism.max(1);
        let originals = bounded_map(sampled, parallelism, |c| self.score_originals(c));
        let model_ids: Vec<String> = self.models.iter().map(|m| m.id.clone()).collect();
        let mut table = RewardTable::new();
        let mut scorable = Vec::new();
        let mut score_failures = Vec::new();
        for (c, r) in sampled.iter().zip(&originals) {
            match r {
                Ok(pairs) => {
                    for (m, (rc, rr)) in model_ids.iter().zip(pairs) {
                        table.insert(m, &c.id, rc.scalar, rr.scalar);
                    }
                    scorable.push(c.clone());
                }
                Err(f) => score_failures.push(f.clone()),
            }
        }
        let agreement = agreement_filter(&scorable, &model_ids, &table)?;
        info!(
            seed,
            sampled = sampled.len(),
            kept = agreement.kept.len(),
            ties = agreement.dropped_ties.len(),
            disagreements = agreement.dropped_disagreements.len(),
            "scored originals"
        );
        let kept: Vec<(usize, &Comparison)> = sampled
            .iter()
            .enumerate()
            .filter(|(_, c)| agreement.kept.iter().any(|k| k.id == c.id))
            .collect();
        let explained = bounded_map(&kept, parallelism, |(i, c)| {
            let pairs = originals[*i].as_ref().expect("kept comparisons were scored");
            self.explain_one(c, pairs)
        });
        let mut explained_by_id = std::collections::HashMap::new();
        for ((_, c), r) in kept.iter().zip(explained) {
            explained_by_id.insert(c.id.clone(), r?);
        }
        let mut run = SeedRun {
            seed,
            comparisons: Vec::with_capacity(sampled.len()),
            sets: Vec::new(),
            generation_failures: Vec::new(),
            score_failures,
        };
        for c in sampled {
            if let Some(e) = explained_by_id.remove(&c.id) {
                debug!(comparison = %c.id, perturbations = e.run.perturbations.len(), "explained");
                run.comparisons.push(e.run);
                run.sets.extend(e.sets);
                run.generation_failures.extend(e.generation_failures);
                run.score_failures.extend(e.score_failures);
                continue;
            }
            let reason = if agreement.dropped_ties.contains(&c.id) {
                SkipReason::Tie
            } else if agreement.dropped_disagreements.contains(&c.id) {
                SkipReason::Disagreement
            } else {
                SkipReason::ScoringFailed
            };
            run.comparisons.push(ComparisonRun {
                comparison: c.clone(),
                outcome: ComparisonOutcome::Skipped(reason),
                perturbations: Vec::new(),
            });
        }
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planned_request_formula() {
        let opts = PipelineOptions::default();
        assert_eq!(opts.planned_requests(10, 1, 15), 10 * (2 + 2 + 60));
        assert_eq!(opts.planned_requests(1, 2, 15), 4 + 2 + 30 + 60);
        let random = PipelineOptions {
            generator: GeneratorKind::RandomBaseline,
            random_per_side: 3,
            ..PipelineOptions::default()
        };
        assert_eq!(random.planned_requests(2, 1, 15), 2 * (2 + 6 + 6));
    }
}
