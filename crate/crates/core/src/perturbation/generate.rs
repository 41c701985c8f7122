use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::prompts::{
    build_discovery_prompt, build_random_prompt, build_step1_prompt, build_step2_prompt, FixtureMarker, MarkerKind,
    OriginalRewards,
};
use super::step1::{parse_step1, Step1Result};
use super::templates::TemplateSet;
use crate::catalog::AttributeCatalog;
use crate::error::{GatewayError, PerturbationError};
use crate::exec::bounded_map;
use crate::gateway::{EndpointConfig, Gateway};
use crate::types::{Comparison, GeneratorKind, Perturbation, PromptVariant, Side};

/// Everything needed to issue generation calls.
#[derive(Clone, Copy)]
pub struct Generator<'a> {
    pub gateway: &'a Gateway,
    pub chat: &'a EndpointConfig,
    pub templates: &'a TemplateSet,
    /// Append fixture markers to prompts (mock servers only).
    pub fixture_markers: bool,
    /// Concurrent rewrite calls per comparison side.
    pub parallelism: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Step1,
    Step2,
    Random,
    Discovery,
}

/// A generation call that produced no perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub comparison_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    pub stage: FailureStage,
    pub message: String,
    /// The endpoint could not be reached (as opposed to answering badly).
    #[serde(default)]
    pub transport: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneratedSets {
    pub chosen: Vec<Perturbation>,
    pub rejected: Vec<Perturbation>,
    pub failures: Vec<GenerationFailure>,
    /// Sides whose step 1 output could not be parsed and that were rewritten
    /// with the unconstrained prompt instead.
    pub step1_fallbacks: Vec<Side>,
}

impl GeneratedSets {
    pub fn side(&self, side: Side) -> &[Perturbation] {
        match side {
            Side::Chosen => &self.chosen,
            Side::Rejected => &self.rejected,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Perturbation> + '_ {
        self.chosen.iter().chain(&self.rejected)
    }
}

impl<'a> Generator<'a> {
    fn mark(&self, prompt: String, marker: FixtureMarker) -> String {
        if self.fixture_markers {
            marker.attach(&prompt)
        } else {
            prompt
        }
    }

    fn failure(
        c: &Comparison,
        side: Option<Side>,
        attribute: Option<&str>,
        stage: FailureStage,
        err: &PerturbationError,
    ) -> GenerationFailure {
        let transport = matches!(err, PerturbationError::Gateway(g) if g.is_transport());
        GenerationFailure {
            comparison_id: c.id.clone(),
            side,
            attribute: attribute.map(str::to_string),
            stage,
            message: err.to_string(),
            transport,
        }
    }

    /// First step for one side: relevant words per attribute. `Ok(None)` means
    /// the output was unusable and the side falls back to the pass prompt.
    fn step1(
        &self,
        c: &Comparison,
        side: Side,
        rewards: OriginalRewards,
        catalog: &AttributeCatalog,
    ) -> Result<Option<Step1Result>, PerturbationError> {
        let prompt = build_step1_prompt(self.templates, c, side, rewards, catalog)?;
        let prompt = self.mark(prompt, FixtureMarker::new(MarkerKind::Step1, &c.id).side(side));
        match self.gateway.chat(self.chat, None, &prompt) {
            Ok(raw) => match parse_step1(&raw, catalog) {
                Ok(r) => Ok(Some(r)),
                Err(PerturbationError::Step1Parse) => Ok(None),
                Err(e) => Err(e),
            },
            Err(GatewayError::EmptyGeneration) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn side_sets(
        &self,
        c: &Comparison,
        side: Side,
        rewards: OriginalRewards,
        catalog: &AttributeCatalog,
        variant: PromptVariant,
        out: &mut GeneratedSets,
    ) -> Vec<Perturbation> {
        let (words, variant, fallback) = match self.step1(c, side, rewards, catalog) {
            Ok(Some(words)) => (words, variant, false),
            Ok(None) => {
                warn!(comparison = %c.id, %side, "step 1 output unusable, falling back to the pass prompt");
                out.step1_fallbacks.push(side);
                (Step1Result::empty(catalog), PromptVariant::Pass, true)
            }
            Err(e) => {
                warn!(comparison = %c.id, %side, "step 1 failed: {e}");
                out.failures
                    .push(Self::failure(c, Some(side), None, FailureStage::Step1, &e));
                return Vec::new();
            }
        };
        let original = c.response(side);
        let results = bounded_map(catalog.attributes(), self.parallelism, |attribute| {
            let attr_words = words.words_for(&attribute.name);
            let prompt = build_step2_prompt(self.templates, c, side, rewards, attribute, attr_words, variant)?;
            let prompt = self.mark(
                prompt,
                FixtureMarker::new(MarkerKind::Step2, &c.id)
                    .side(side)
                    .attribute(&attribute.name),
            );
            let text = self.gateway.chat(self.chat, None, &prompt)?.trim().to_string();
            if text.is_empty() {
                return Err(PerturbationError::Gateway(GatewayError::EmptyGeneration));
            }
            Ok(Perturbation {
                comparison_id: c.id.clone(),
                side,
                attribute: Some(attribute.name.clone()),
                degenerate: text == original,
                text,
                generator: GeneratorKind::AttributeConditioned,
                prompt_variant: variant,
                relevant_words: (!fallback).then(|| attr_words.to_vec()),
            })
        });
        let mut perturbations = Vec::new();
        for (attribute, r) in catalog.attributes().iter().zip(results) {
            match r {
                Ok(p) => perturbations.push(p),
                Err(e) => {
                    warn!(comparison = %c.id, %side, attribute = %attribute.name, "rewrite failed: {e}");
                    out.failures.push(Self::failure(
                        c,
                        Some(side),
                        Some(&attribute.name),
                        FailureStage::Step2,
                        &e,
                    ));
                }
            }
        }
        perturbations
    }

    /// Attribute-conditioned rewrites of both sides of an oriented comparison:
    /// one word-identification call per side, then one rewrite call per
    /// attribute. Output is in catalog order per side.
    pub fn generate_perturbation_sets(
        &self,
        c: &Comparison,
        rewards: OriginalRewards,
        catalog: &AttributeCatalog,
        variant: PromptVariant,
    ) -> GeneratedSets {
        let mut out = GeneratedSets::default();
        let chosen = self.side_sets(c, Side::Chosen, rewards, catalog, variant, &mut out);
        let rejected = self.side_sets(c, Side::Rejected, rewards, catalog, variant, &mut out);
        out.chosen = chosen;
        out.rejected = rejected;
        out
    }

    /// `n_per_side` unconditioned rewrites per side. Calls are distinguished
    /// by a per-call seed, so a zero temperature would make them identical.
    pub fn generate_random_baseline(
        &self,
        c: &Comparison,
        n_per_side: usize,
        variant: PromptVariant,
    ) -> Result<GeneratedSets, PerturbationError> {
        if n_per_side == 0 {
            return Err(PerturbationError::Config("random baseline needs n_per_side >= 1".into()));
        }
        if self.chat.temperature == 0.0 && n_per_side > 1 {
            return Err(PerturbationError::Config(format!(
                "random baseline with {n_per_side} samples per side needs a nonzero chat temperature"
            )));
        }
        let mut out = GeneratedSets::default();
        for side in Side::BOTH {
            let prompt = build_random_prompt(self.templates, c, side)?;
            let samples: Vec<u64> = (0..n_per_side as u64).collect();
            let results = bounded_map(&samples, self.parallelism, |&i| {
                let p = self.mark(
                    prompt.clone(),
                    FixtureMarker::new(MarkerKind::Random, &c.id).side(side).sample(i),
                );
                self.gateway
                    .chat_with_seed(self.chat, None, &p, Some(i))
                    .map(|t| t.trim().to_string())
                    .map_err(PerturbationError::from)
            });
            let mut set = Vec::new();
            for r in results {
                match r {
                    Ok(text) => set.push(Perturbation {
                        comparison_id: c.id.clone(),
                        side,
                        attribute: None,
                        degenerate: text == c.response(side),
                        text,
                        generator: GeneratorKind::RandomBaseline,
                        prompt_variant: variant,
                        relevant_words: None,
                    }),
                    Err(e) => out
                        .failures
                        .push(Self::failure(c, Some(side), None, FailureStage::Random, &e)),
                }
            }
            match side {
                Side::Chosen => out.chosen = set,
                Side::Rejected => out.rejected = set,
            }
        }
        Ok(out)
    }

    /// Ask for free-form attributes explaining each preference and rank them
    /// by how often they are named, most frequent first (ties keep first-seen
    /// order).
    pub fn discover_attributes(
        &self,
        comparisons: &[(Comparison, OriginalRewards)],
    ) -> Result<(Vec<(String, usize)>, Vec<GenerationFailure>), PerturbationError> {
        let results = bounded_map(comparisons, self.parallelism, |(c, rewards)| {
            let prompt = build_discovery_prompt(self.templates, c, *rewards)?;
            let prompt = self.mark(prompt, FixtureMarker::new(MarkerKind::Discover, &c.id));
            Ok::<_, PerturbationError>(self.gateway.chat(self.chat, None, &prompt)?)
        });
        let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
        let mut failures = Vec::new();
        let mut answered = 0usize;
        for ((c, _), r) in comparisons.iter().zip(results) {
            match r {
                Ok(text) => {
                    answered += 1;
                    for item in text.split([',', '\n']) {
                        let name = normalize_attribute(item);
                        if name.is_empty() {
                            continue;
                        }
                        let next = counts.len();
                        counts.entry(name).or_insert((0, next)).0 += 1;
                    }
                }
                Err(e) => failures.push(Self::failure(c, None, None, FailureStage::Discovery, &e)),
            }
        }
        if answered == 0 {
            return Err(PerturbationError::Discovery);
        }
        let mut ranked: Vec<(String, usize, usize)> = counts.into_iter().map(|(k, (n, first))| (k, n, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        info!(distinct = ranked.len(), answered, "attribute discovery finished");
        Ok((ranked.into_iter().map(|(k, n, _)| (k, n)).collect(), failures))
    }
}

fn normalize_attribute(raw: &str) -> String {
    raw.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() && c != '-' || c.is_whitespace())
        .trim()
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_normalization() {
        assert_eq!(normalize_attribute(" Verbosity. "), "verbosity");
        assert_eq!(normalize_attribute("'clarity'"), "clarity");
        assert_eq!(normalize_attribute("factual-accuracy"), "factual-accuracy");
        assert_eq!(normalize_attribute("  "), "");
    }
}
