#![allow(dead_code)]

use rmcontrast::gateway::{HttpRequest, Transport, TransportFailure};
use rmcontrast::perturbation::{FixtureMarker, MarkerKind};
use rmcontrast::sampling::SplitMix64;
use rmcontrast::{
    categorize_perturbation, Attribute, AttributeCatalog, Comparison, GeneratorKind, Perturbation, PromptVariant,
    RewardValue, ScoredExplanationSet, ScoredPerturbation, Side,
};
use serde_json::{json, Value};

pub fn catalog(names: &[&str]) -> AttributeCatalog {
    AttributeCatalog::new(names.iter().map(|n| Attribute::new(*n, format!("{n} of the response"))).collect()).unwrap()
}

pub const ATTRIBUTES: [&str; 5] = ["clarity", "harmlessness", "helpfulness", "politeness", "verbosity"];

/// One scored set with the given original rewards and one rewrite reward per
/// attribute and side (`None` leaves the rewrite out).
pub fn scored_set(
    id: &str,
    model: &str,
    chosen: f64,
    rejected: f64,
    chosen_rewrites: &[(&str, f64)],
    rejected_rewrites: &[(&str, f64)],
) -> ScoredExplanationSet {
    let mut entries = Vec::new();
    for (side, rewrites, other) in [
        (Side::Chosen, chosen_rewrites, rejected),
        (Side::Rejected, rejected_rewrites, chosen),
    ] {
        for (attribute, reward) in rewrites {
            entries.push(ScoredPerturbation {
                perturbation: Perturbation {
                    comparison_id: id.to_string(),
                    side,
                    attribute: Some(attribute.to_string()),
                    text: format!("{attribute} rewrite of {id} {side}"),
                    generator: GeneratorKind::AttributeConditioned,
                    prompt_variant: PromptVariant::Center,
                    relevant_words: None,
                    degenerate: false,
                },
                reward: RewardValue::scalar(*reward),
                label: categorize_perturbation(side, other, *reward).unwrap(),
            });
        }
    }
    ScoredExplanationSet {
        comparison_id: id.to_string(),
        model_id: model.to_string(),
        reward_chosen: RewardValue::scalar(chosen),
        reward_rejected: RewardValue::scalar(rejected),
        orientation_swapped: false,
        entries,
    }
}

/// Random sets over `attributes` with small-integer rewards, so that ties
/// occur and affine maps with exact constants stay exact.
pub fn random_sets(rng: &mut SplitMix64, model: &str, n: usize, attributes: &[&str]) -> Vec<ScoredExplanationSet> {
    (0..n)
        .map(|i| {
            let rejected = rng.below(8) as f64;
            let chosen = rejected + 1.0 + rng.below(8) as f64;
            let chosen_rw: Vec<(&str, f64)> = attributes
                .iter()
                .map(|a| (*a, rng.below(20) as f64 - 2.0))
                .collect();
            let rejected_rw: Vec<(&str, f64)> = attributes
                .iter()
                .map(|a| (*a, rng.below(20) as f64 - 2.0))
                .collect();
            scored_set(&format!("c{i:03}"), model, chosen, rejected, &chosen_rw, &rejected_rw)
        })
        .collect()
}

/// Rebuild `set` with every reward mapped through `f` and labels recomputed.
pub fn map_rewards(set: &ScoredExplanationSet, f: impl Fn(f64) -> f64) -> ScoredExplanationSet {
    let reward_chosen = set.reward_chosen.map(&f);
    let reward_rejected = set.reward_rejected.map(&f);
    let entries = set
        .entries
        .iter()
        .map(|e| {
            let reward = e.reward.map(&f);
            let other = match e.perturbation.side {
                Side::Chosen => reward_rejected.scalar,
                Side::Rejected => reward_chosen.scalar,
            };
            ScoredPerturbation {
                perturbation: e.perturbation.clone(),
                label: categorize_perturbation(e.perturbation.side, other, reward.scalar).unwrap(),
                reward,
            }
        })
        .collect();
    ScoredExplanationSet {
        reward_chosen,
        reward_rejected,
        entries,
        ..set.clone()
    }
}

pub fn comparisons(n: usize) -> Vec<Comparison> {
    (0..n)
        .map(|i| {
            Comparison::new(
                format!("d:{}", i + 1),
                format!("question number {i}"),
                format!("a careful and complete answer to question {i} with extra detail"),
                format!("short reply {i}"),
            )
            .unwrap()
        })
        .collect()
}

/// Deterministic endpoints: reward is the word count minus three per
/// occurrence of "bad"; chat answers fixture markers; embeddings count
/// letters.
#[derive(Debug, Default)]
pub struct Services;

impl Services {
    fn answer(prompt: &str) -> Option<String> {
        let m = FixtureMarker::find_in(prompt)?;
        Some(match m.kind {
            MarkerKind::Step1 => "clarity: answer\nhelpfulness: detail".to_string(),
            MarkerKind::Step2 => {
                let attribute = m.attribute?;
                match (m.side?, attribute.as_str()) {
                    (Side::Chosen, "harmlessness") => "bad bad bad bad bad bad bad".to_string(),
                    (Side::Chosen, a) => format!("{a} rewrite keeps most of the answer intact here"),
                    (Side::Rejected, "helpfulness") => {
                        "a much longer and more helpful reply with many many many many extra words".to_string()
                    }
                    (Side::Rejected, a) => format!("{a} reply"),
                }
            }
            MarkerKind::Random => format!("random rewrite {}", m.sample.unwrap_or(0)),
            MarkerKind::Discover => "clarity\nverbosity".to_string(),
        })
    }
}

pub fn toy_reward(text: &str) -> f64 {
    text.split_whitespace()
        .map(|w| if w == "bad" { -3.0 } else { 1.0 })
        .sum()
}

pub fn letter_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; 26];
    for b in text.bytes().filter(u8::is_ascii_lowercase) {
        v[(b - b'a') as usize] += 1.0;
    }
    v
}

impl Transport for Services {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        let body: Value = serde_json::from_str(request.body).map_err(|e| TransportFailure::Io(e.to_string()))?;
        let reply = if request.url.ends_with("/score") {
            json!({ "reward": toy_reward(body["response"].as_str().unwrap_or_default()) })
        } else if request.url.ends_with("/v1/embeddings") {
            json!({ "data": [{ "embedding": letter_embedding(body["input"].as_str().unwrap_or_default()) }] })
        } else {
            let prompt = body["messages"]
                .as_array()
                .and_then(|m| m.last())
                .and_then(|m| m["content"].as_str())
                .unwrap_or_default();
            match Self::answer(prompt) {
                Some(text) => json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }),
                None => {
                    return Err(TransportFailure::Status {
                        status: 404,
                        body: "{}".into(),
                    })
                }
            }
        };
        Ok(reply.to_string())
    }
}
