//! Domain types shared across the toolkit.
//!
//! All of these are plain immutable values. They are `Send + Sync` and can be
//! handed to worker threads freely.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::InvalidInput;

/// Which response a human (or dataset) labelled as preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    ChosenPreferred,
    RejectedPreferred,
}

impl GroundTruth {
    pub fn flipped(self) -> Self {
        match self {
            GroundTruth::ChosenPreferred => GroundTruth::RejectedPreferred,
            GroundTruth::RejectedPreferred => GroundTruth::ChosenPreferred,
        }
    }
}

/// A prompt with two candidate responses.
///
/// `chosen` is the response occupying the preferred slot. Before explanation
/// the pipeline re-orients comparisons so that this slot holds the response
/// the reward model itself prefers (see [`crate::contrast::orient_comparison`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_scores: Option<(Vec<f64>, Vec<f64>)>,
}

impl Comparison {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        chosen: impl Into<String>,
        rejected: impl Into<String>,
    ) -> Result<Self, InvalidInput> {
        let c = Comparison {
            id: id.into(),
            prompt: prompt.into(),
            chosen: chosen.into(),
            rejected: rejected.into(),
            ground_truth: None,
            aspect_scores: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    pub fn with_aspect_scores(
        mut self,
        chosen: Vec<f64>,
        rejected: Vec<f64>,
    ) -> Result<Self, InvalidInput> {
        self.aspect_scores = Some((chosen, rejected));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), InvalidInput> {
        if self.prompt.is_empty() {
            return Err(InvalidInput::new(format!("comparison {}: empty prompt", self.id)));
        }
        if self.chosen == self.rejected {
            return Err(InvalidInput::new(format!(
                "comparison {}: chosen and rejected responses are identical",
                self.id
            )));
        }
        if let Some((a, b)) = &self.aspect_scores {
            if a.len() != b.len() {
                return Err(InvalidInput::new(format!(
                    "comparison {}: aspect score dimensions differ ({} vs {})",
                    self.id,
                    a.len(),
                    b.len()
                )));
            }
        }
        Ok(())
    }

    /// Text of the response on `side`.
    pub fn response(&self, side: Side) -> &str {
        match side {
            Side::Chosen => &self.chosen,
            Side::Rejected => &self.rejected,
        }
    }

    /// Exchange the two responses along with everything attached to them.
    pub fn swapped(&self) -> Self {
        Comparison {
            id: self.id.clone(),
            prompt: self.prompt.clone(),
            chosen: self.rejected.clone(),
            rejected: self.chosen.clone(),
            ground_truth: self.ground_truth.map(GroundTruth::flipped),
            aspect_scores: self
                .aspect_scores
                .as_ref()
                .map(|(a, b)| (b.clone(), a.clone())),
        }
    }
}

/// Which original response a perturbation rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Chosen,
    Rejected,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Chosen, Side::Rejected];

    pub fn other(self) -> Side {
        match self {
            Side::Chosen => Side::Rejected,
            Side::Rejected => Side::Chosen,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Chosen => "chosen",
            Side::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = InvalidInput;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chosen" => Ok(Side::Chosen),
            "rejected" => Ok(Side::Rejected),
            other => Err(InvalidInput::new(format!("unknown side `{other}`"))),
        }
    }
}

/// How a perturbation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    AttributeConditioned,
    RandomBaseline,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::AttributeConditioned => "attribute_conditioned",
            GeneratorKind::RandomBaseline => "random_baseline",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = InvalidInput;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attribute_conditioned" | "attribute" => Ok(GeneratorKind::AttributeConditioned),
            "random_baseline" | "random" => Ok(GeneratorKind::RandomBaseline),
            other => Err(InvalidInput::new(format!("unknown generator `{other}`"))),
        }
    }
}

/// Word-constraint sentence used in the rewrite prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    /// Changes centred around the words found in the first step.
    #[default]
    Center,
    /// Only deletions, replacements or insertions at those words.
    Only,
    /// No word constraint at all.
    Pass,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] = [PromptVariant::Only, PromptVariant::Pass, PromptVariant::Center];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Center => "center",
            PromptVariant::Only => "only",
            PromptVariant::Pass => "pass",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = InvalidInput;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" => Ok(PromptVariant::Center),
            "only" => Ok(PromptVariant::Only),
            "pass" => Ok(PromptVariant::Pass),
            other => Err(InvalidInput::new(format!("unknown prompt variant `{other}`"))),
        }
    }
}

/// One rewrite of one side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub comparison_id: String,
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    pub text: String,
    pub generator: GeneratorKind,
    pub prompt_variant: PromptVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_words: Option<Vec<String>>,
    /// The rewrite is byte-identical to the original response.
    #[serde(default)]
    pub degenerate: bool,
}

impl Perturbation {
    pub fn validate(&self) -> Result<(), InvalidInput> {
        if self.text.is_empty() {
            return Err(InvalidInput::new(format!(
                "perturbation of {} ({}): empty text",
                self.comparison_id, self.side
            )));
        }
        let conditioned = self.generator == GeneratorKind::AttributeConditioned;
        if conditioned != self.attribute.is_some() {
            return Err(InvalidInput::new(format!(
                "perturbation of {} ({}): attribute must be present iff generator is attribute_conditioned",
                self.comparison_id, self.side
            )));
        }
        Ok(())
    }
}

/// A reward as returned by a reward endpoint, collapsed to a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardValue {
    pub scalar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default)]
    pub scalarisation_applied: bool,
}

impl RewardValue {
    pub fn scalar(value: f64) -> Self {
        RewardValue {
            scalar: value,
            vector: None,
            scalarisation_applied: false,
        }
    }

    /// Apply `f` to the scalar (and vector components, if any).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RewardValue {
            scalar: f(self.scalar),
            vector: self.vector.as_ref().map(|v| v.iter().map(|x| f(*x)).collect()),
            scalarisation_applied: self.scalarisation_applied,
        }
    }
}

impl From<f64> for RewardValue {
    fn from(value: f64) -> Self {
        RewardValue::scalar(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastLabel {
    Counterfactual,
    Semifactual,
}

impl ContrastLabel {
    pub fn is_counterfactual(self) -> bool {
        self == ContrastLabel::Counterfactual
    }

    pub fn short(self) -> &'static str {
        match self {
            ContrastLabel::Counterfactual => "CF",
            ContrastLabel::Semifactual => "SF",
        }
    }
}

/// A perturbation together with the reward it received and its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPerturbation {
    pub perturbation: Perturbation,
    pub reward: RewardValue,
    pub label: ContrastLabel,
}

/// Every scored perturbation of one comparison under one reward model.
///
/// Only defined for comparisons the model strictly prefers in the stored
/// orientation: `reward_chosen.scalar > reward_rejected.scalar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExplanationSet {
    pub comparison_id: String,
    pub model_id: String,
    pub reward_chosen: RewardValue,
    pub reward_rejected: RewardValue,
    /// The comparison was swapped relative to its dataset labels before
    /// explanation.
    #[serde(default)]
    pub orientation_swapped: bool,
    pub entries: Vec<ScoredPerturbation>,
}

impl ScoredExplanationSet {
    pub fn original_reward(&self, side: Side) -> f64 {
        match side {
            Side::Chosen => self.reward_chosen.scalar,
            Side::Rejected => self.reward_rejected.scalar,
        }
    }

    pub fn side_entries(&self, side: Side) -> impl Iterator<Item = &ScoredPerturbation> + '_ {
        self.entries.iter().filter(move |e| e.perturbation.side == side)
    }

    pub fn has_label(&self, side: Side, label: ContrastLabel) -> bool {
        self.side_entries(side).any(|e| e.label == label)
    }

    /// Check the ordering invariant and that every stored label agrees with
    /// the categorization rule.
    pub fn validate(&self) -> Result<(), InvalidInput> {
        if !(self.reward_chosen.scalar > self.reward_rejected.scalar) {
            return Err(InvalidInput::new(format!(
                "explanation set {}/{}: chosen reward {} does not exceed rejected reward {}",
                self.comparison_id, self.model_id, self.reward_chosen.scalar, self.reward_rejected.scalar
            )));
        }
        for e in &self.entries {
            let side = e.perturbation.side;
            let expected = crate::contrast::categorize_perturbation(
                side,
                self.original_reward(side.other()),
                e.reward.scalar,
            )?;
            if expected != e.label {
                return Err(InvalidInput::new(format!(
                    "explanation set {}/{}: stored label {:?} disagrees with rewards",
                    self.comparison_id, self.model_id, e.label
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_rejects_identical_responses() {
        assert!(Comparison::new("a", "p", "same", "same").is_err());
        assert!(Comparison::new("a", "", "x", "y").is_err());
    }

    #[test]
    fn comparison_rejects_unequal_aspect_dimensions() {
        let c = Comparison::new("a", "p", "x", "y").unwrap();
        assert!(c.clone().with_aspect_scores(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(c.with_aspect_scores(vec![1.0, 2.0], vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn swap_moves_attached_data() {
        let c = Comparison::new("a", "p", "x", "y")
            .unwrap()
            .with_ground_truth(GroundTruth::ChosenPreferred)
            .with_aspect_scores(vec![3.0], vec![1.0])
            .unwrap();
        let s = c.swapped();
        assert_eq!(s.chosen, "y");
        assert_eq!(s.rejected, "x");
        assert_eq!(s.ground_truth, Some(GroundTruth::RejectedPreferred));
        assert_eq!(s.aspect_scores, Some((vec![1.0], vec![3.0])));
        assert_eq!(s.swapped(), c);
    }

    #[test]
    fn perturbation_attribute_tracks_generator() {
        let mut p = Perturbation {
            comparison_id: "c".into(),
            side: Side::Chosen,
            attribute: None,
            text: "t".into(),
            generator: GeneratorKind::AttributeConditioned,
            prompt_variant: PromptVariant::Center,
            relevant_words: None,
            degenerate: false,
        };
        assert!(p.validate().is_err());
        p.attribute = Some("clarity".into());
        assert!(p.validate().is_ok());
        p.generator = GeneratorKind::RandomBaseline;
        assert!(p.validate().is_err());
    }
}
