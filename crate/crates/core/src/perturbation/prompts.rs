use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::templates::{TemplateId, TemplateSet};
use crate::catalog::{Attribute, AttributeCatalog};
use crate::error::PerturbationError;
use crate::types::{Comparison, PromptVariant, Side};

/// Rewards of the two original responses of an oriented comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalRewards {
    pub chosen: f64,
    pub rejected: f64,
}

impl OriginalRewards {
    pub fn new(chosen: f64, rejected: f64) -> Self {
        OriginalRewards { chosen, rejected }
    }

    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Chosen => self.chosen,
            Side::Rejected => self.rejected,
        }
    }
}

pub fn format_score(score: f64) -> String {
    format!("{score:.4}")
}

/// Values shared by the step 1 and step 2 prompts: response A is the side
/// being perturbed, response B the other one.
fn base_values(c: &Comparison, side: Side, rewards: OriginalRewards) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("question", c.prompt.clone());
    v.insert("response_1", c.response(side).to_string());
    v.insert("response_2", c.response(side.other()).to_string());
    v.insert("score_1", format_score(rewards.get(side)));
    v.insert("score_2", format_score(rewards.get(side.other())));
    // How response A currently compares to B.
    v.insert(
        "better_worse",
        match side {
            Side::Chosen => "better",
            Side::Rejected => "worse",
        }
        .to_string(),
    );
    // Where the rewrite should move it.
    v.insert(
        "target_better_worse",
        match side {
            Side::Chosen => "worse",
            Side::Rejected => "better",
        }
        .to_string(),
    );
    v.insert(
        "positively_negatively",
        match side {
            Side::Chosen => "Negatively",
            Side::Rejected => "Positively",
        }
        .to_string(),
    );
    v
}

pub fn build_step1_prompt(
    templates: &TemplateSet,
    c: &Comparison,
    side: Side,
    rewards: OriginalRewards,
    catalog: &AttributeCatalog,
) -> Result<String, PerturbationError> {
    let mut v = base_values(c, side, rewards);
    v.insert("attribute_list", catalog.names().collect::<Vec<_>>().join(", "));
    templates.get(TemplateId::Step1).render(&v)
}

pub fn build_step2_prompt(
    templates: &TemplateSet,
    c: &Comparison,
    side: Side,
    rewards: OriginalRewards,
    attribute: &Attribute,
    words: &[String],
    variant: PromptVariant,
) -> Result<String, PerturbationError> {
    let mut v = base_values(c, side, rewards);
    v.insert("attribute", attribute.name.clone());
    v.insert("attribute_description", attribute.description.clone());
    v.insert("relevant_words", words.join(", "));
    templates.get(TemplateId::step2(variant)).render(&v)
}

pub fn build_random_prompt(templates: &TemplateSet, c: &Comparison, side: Side) -> Result<String, PerturbationError> {
    let mut v = BTreeMap::new();
    v.insert("response_1", c.response(side).to_string());
    templates.get(TemplateId::RandomBaseline).render(&v)
}

pub fn build_discovery_prompt(
    templates: &TemplateSet,
    c: &Comparison,
    rewards: OriginalRewards,
) -> Result<String, PerturbationError> {
    let v = base_values(c, Side::Chosen, rewards);
    templates.get(TemplateId::AttributeDiscovery).render(&v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkerKind {
    Step1,
    Step2,
    Random,
    Discover,
}

impl MarkerKind {
    fn tag(self) -> &'static str {
        match self {
            MarkerKind::Step1 => "[step1]",
            MarkerKind::Step2 => "[step2]",
            MarkerKind::Random => "[random]",
            MarkerKind::Discover => "[discover]",
        }
    }
}

/// Lookup key appended to prompts in test mode so mock servers can answer
/// from fixtures: `<!-- [step2] comparison=<id> side=<side> attribute=<name> -->`.
///
/// Comparison ids and attribute names must not contain whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixtureMarker {
    pub kind: MarkerKind,
    pub comparison: String,
    pub side: Option<Side>,
    pub attribute: Option<String>,
    pub sample: Option<u64>,
}

impl FixtureMarker {
    pub fn new(kind: MarkerKind, comparison: &str) -> Self {
        FixtureMarker {
            kind,
            comparison: comparison.to_string(),
            side: None,
            attribute: None,
            sample: None,
        }
    }

    pub fn side(mut self, side: Side) -> Self {
        self.side = Some(side);
        self
    }

    pub fn attribute(mut self, attribute: &str) -> Self {
        self.attribute = Some(attribute.to_string());
        self
    }

    pub fn sample(mut self, sample: u64) -> Self {
        self.sample = Some(sample);
        self
    }

    /// Append this marker to a prompt.
    pub fn attach(&self, prompt: &str) -> String {
        format!("{prompt}\n\n{self}")
    }

    /// Find the last marker in `text`.
    pub fn find_in(text: &str) -> Option<FixtureMarker> {
        let start = text.rfind("<!-- [")?;
        let rest = &text[start + 5..];
        let end = rest.find("-->")?;
        let mut tokens = rest[..end].split_whitespace();
        let kind = match tokens.next()? {
            "[step1]" => MarkerKind::Step1,
            "[step2]" => MarkerKind::Step2,
            "[random]" => MarkerKind::Random,
            "[discover]" => MarkerKind::Discover,
            _ => return None,
        };
        let mut marker = FixtureMarker::new(kind, "");
        for t in tokens {
            let (k, v) = t.split_once('=')?;
            match k {
                "comparison" => marker.comparison = v.to_string(),
                "side" => marker.side = Some(v.parse().ok()?),
                "attribute" => marker.attribute = Some(v.to_string()),
                "sample" => marker.sample = Some(v.parse().ok()?),
                _ => return None,
            }
        }
        (!marker.comparison.is_empty()).then_some(marker)
    }
}

impl fmt::Display for FixtureMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<!-- {} comparison={}", self.kind.tag(), self.comparison)?;
        if let Some(s) = self.side {
            write!(f, " side={s}")?;
        }
        if let Some(a) = &self.attribute {
            write!(f, " attribute={a}")?;
        }
        if let Some(n) = self.sample {
            write!(f, " sample={n}")?;
        }
        f.write_str(" -->")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comparison() -> Comparison {
        Comparison::new("toy:1", "How do I bake bread?", "Knead the dough and bake it.", "No idea.").unwrap()
    }

    fn rewards() -> OriginalRewards {
        OriginalRewards::new(1.25, -0.5)
    }

    #[test]
    fn step1_chosen_side() {
        let t = TemplateSet::default();
        let p = build_step1_prompt(&t, &comparison(), Side::Chosen, rewards(), &AttributeCatalog::default()).unwrap();
        assert_eq!(p.matches("assigned a score").count(), 2);
        let list = AttributeCatalog::default().names().collect::<Vec<_>>().join(", ");
        assert!(p.contains(&list));
        assert!(p.contains("assign a better score for response A"));
        assert!(p.contains("score 1.2500 for response A: 'Knead the dough and bake it.'"));
        assert!(p.contains("score -0.5000 for response B: 'No idea.'"));
    }

    #[test]
    fn step1_rejected_side_reads_worse() {
        let t = TemplateSet::default();
        let p = build_step1_prompt(&t, &comparison(), Side::Rejected, rewards(), &AttributeCatalog::default()).unwrap();
        assert!(p.contains("assign a worse score for response A"));
        assert!(p.contains("response A: 'No idea.'"));
    }

    #[test]
    fn step1_two_attribute_list() {
        let t = TemplateSet::default();
        let cat = AttributeCatalog::new(vec![Attribute::new("clarity", "c"), Attribute::new("verbosity", "v")]).unwrap();
        let p = build_step1_prompt(&t, &comparison(), Side::Chosen, rewards(), &cat).unwrap();
        let line = p.lines().find(|l| l.starts_with("The high-level attributes")).unwrap();
        let list = line.split(" are ").nth(1).unwrap();
        assert_eq!(list, "clarity, verbosity.");
        assert_eq!(list.matches(',').count(), 1);
    }

    #[test]
    fn step2_variants() {
        let t = TemplateSet::default();
        let cat = AttributeCatalog::default();
        let words = vec!["knead".to_string(), "bake".to_string()];
        let harm = cat.get("harmlessness").unwrap();
        let p = build_step2_prompt(&t, &comparison(), Side::Chosen, rewards(), harm, &words, PromptVariant::Center).unwrap();
        assert!(p.contains("centered around the following words: knead, bake"));
        assert!(p.contains("worse in terms of harmlessness"));
        assert!(p.contains("Negatively change"));
        assert!(p.contains("Only output the modified response A"));
        assert!(p.contains(&harm.description));

        let clarity = cat.get("clarity").unwrap();
        let p = build_step2_prompt(&t, &comparison(), Side::Rejected, rewards(), clarity, &words, PromptVariant::Only).unwrap();
        assert!(p.contains("can only be modified by deleting, replacing, or inserting words"));
        assert!(p.contains("better in terms of clarity"));
        assert!(p.contains("Positively change"));

        let p = build_step2_prompt(&t, &comparison(), Side::Chosen, rewards(), clarity, &words, PromptVariant::Pass).unwrap();
        assert!(!p.contains("centered around"));
        assert!(!p.contains("can only be modified"));
    }

    #[test]
    fn random_and_discovery_prompts() {
        let t = TemplateSet::default();
        let p = build_random_prompt(&t, &comparison(), Side::Rejected).unwrap();
        assert!(p.starts_with("Generate a random perturbation of this piece of text: No idea.."));
        let p = build_discovery_prompt(&t, &comparison(), rewards()).unwrap();
        assert!(p.contains("List out some high-level attributes"));
        assert!(p.contains("response A: 'Knead the dough and bake it.'"));
    }

    #[test]
    fn marker_round_trip() {
        let m = FixtureMarker::new(MarkerKind::Step2, "toy:3")
            .side(Side::Rejected)
            .attribute("avoid-to-answer");
        let prompt = m.attach("some prompt with <!-- html --> inside");
        assert_eq!(FixtureMarker::find_in(&prompt), Some(m));
        let r = FixtureMarker::new(MarkerKind::Random, "x:1").side(Side::Chosen).sample(4);
        assert_eq!(FixtureMarker::find_in(&r.to_string()), Some(r));
        assert_eq!(FixtureMarker::find_in("no marker"), None);
    }
}
