//! Prompt templates with `{name}` placeholders.
//!
//! Built-in bodies live in `templates/*.txt`; any of them can be replaced by a
//! file of the same name in an override directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::PerturbationError;
use crate::types::PromptVariant;

/// Every placeholder a template may use.
pub const PLACEHOLDERS: &[&str] = &[
    "question",
    "response_1",
    "response_2",
    "score_1",
    "score_2",
    "attribute",
    "attribute_description",
    "attribute_list",
    "relevant_words",
    "better_worse",
    "target_better_worse",
    "positively_negatively",
];

pub const CENTER_SENTENCE: &str = "The changes made to response A should be centered around the following words";
pub const ONLY_SENTENCE: &str = "Response A can only be modified by deleting, replacing, or inserting words";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Step1,
    Step2Center,
    Step2Only,
    Step2Pass,
    RandomBaseline,
    AttributeDiscovery,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::Step1,
        TemplateId::Step2Center,
        TemplateId::Step2Only,
        TemplateId::Step2Pass,
        TemplateId::RandomBaseline,
        TemplateId::AttributeDiscovery,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateId::Step1 => "step1",
            TemplateId::Step2Center => "step2_center",
            TemplateId::Step2Only => "step2_only",
            TemplateId::Step2Pass => "step2_pass",
            TemplateId::RandomBaseline => "random_baseline",
            TemplateId::AttributeDiscovery => "attribute_discovery",
        }
    }

    pub fn step2(variant: PromptVariant) -> Self {
        match variant {
            PromptVariant::Center => TemplateId::Step2Center,
            PromptVariant::Only => TemplateId::Step2Only,
            PromptVariant::Pass => TemplateId::Step2Pass,
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::Step1 => include_str!("../../templates/step1.txt"),
            TemplateId::Step2Center => include_str!("../../templates/step2_center.txt"),
            TemplateId::Step2Only => include_str!("../../templates/step2_only.txt"),
            TemplateId::Step2Pass => include_str!("../../templates/step2_pass.txt"),
            TemplateId::RandomBaseline => include_str!("../../templates/random_baseline.txt"),
            TemplateId::AttributeDiscovery => include_str!("../../templates/attribute_discovery.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// A validated template body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate", into = "RawTemplate")]
pub struct PromptTemplate {
    id: TemplateId,
    body: String,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct RawTemplate {
    id: TemplateId,
    body: String,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = PerturbationError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        PromptTemplate::new(raw.id, raw.body)
    }
}

impl From<PromptTemplate> for RawTemplate {
    fn from(t: PromptTemplate) -> Self {
        RawTemplate { id: t.id, body: t.body }
    }
}

fn split_pieces(body: &str) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            text.push_str(&rest[..open]);
            if !text.is_empty() {
                pieces.push(Piece::Text(std::mem::take(&mut text)));
            }
            pieces.push(Piece::Slot(after[..name_len].to_string()));
            rest = &after[name_len + 1..];
        } else {
            text.push_str(&rest[..=open]);
            rest = after;
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    pieces
}

impl PromptTemplate {
    pub fn new(id: TemplateId, body: impl Into<String>) -> Result<Self, PerturbationError> {
        let body = body.into().trim_end().to_string();
        let pieces = split_pieces(&body);
        let fail = |message: String| PerturbationError::Template {
            template: id.file_stem().to_string(),
            message,
        };
        for p in &pieces {
            if let Piece::Slot(name) = p {
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(fail(format!("unknown placeholder {{{name}}}")));
                }
            }
        }
        let has_center = body.contains(CENTER_SENTENCE);
        let has_only = body.contains(ONLY_SENTENCE);
        match id {
            TemplateId::Step2Center if !has_center || has_only => {
                return Err(fail("must contain the centered-around sentence and not the only sentence".into()))
            }
            TemplateId::Step2Only if !has_only || has_center => {
                return Err(fail("must contain the only-modified sentence and not the centered sentence".into()))
            }
            TemplateId::Step2Pass if has_center || has_only => {
                return Err(fail("must not contain a word-constraint sentence".into()))
            }
            _ => {}
        }
        Ok(PromptTemplate { id, body, pieces })
    }

    pub fn builtin(id: TemplateId) -> Self {
        Self::new(id, id.builtin()).expect("built-in templates are valid")
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> + '_ {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(s.as_str()),
            Piece::Text(_) => None,
        })
    }

    /// Fill every placeholder in one pass; substituted values are never
    /// re-scanned for placeholders.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PerturbationError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let v = values.get(name.as_str()).ok_or_else(|| PerturbationError::Template {
                        template: self.id.file_stem().to_string(),
                        message: format!("no value for placeholder {{{name}}}"),
                    })?;
                    out.push_str(v);
                }
            }
        }
        Ok(out)
    }
}

/// The full set of templates used by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: TemplateId::ALL
                .iter()
                .map(|id| (*id, PromptTemplate::builtin(*id)))
                .collect(),
        }
    }
}

impl TemplateSet {
    /// Built-ins, replaced by `<dir>/<stem>.txt` where such a file exists.
    pub fn with_overrides(dir: &Path) -> Result<Self, PerturbationError> {
        let mut set = Self::default();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.file_stem()));
            if path.exists() {
                let body = std::fs::read_to_string(&path).map_err(|e| PerturbationError::Template {
                    template: id.file_stem().to_string(),
                    message: format!("{}: {e}", path.display()),
                })?;
                set.templates.insert(id, PromptTemplate::new(id, body)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        let set = TemplateSet::default();
        for id in TemplateId::ALL {
            assert!(!set.get(id).body().is_empty());
        }
        assert!(set.get(TemplateId::Step2Center).body().contains(CENTER_SENTENCE));
        assert!(set.get(TemplateId::Step2Only).body().contains(ONLY_SENTENCE));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        assert!(PromptTemplate::new(TemplateId::Step1, "hi {nope}").is_err());
        // Braces that are not identifiers are literal text.
        let t = PromptTemplate::new(TemplateId::Step1, "json {\"a\": 1} and {question}").unwrap();
        let mut v = BTreeMap::new();
        v.insert("question", "q".to_string());
        assert_eq!(t.render(&v).unwrap(), "json {\"a\": 1} and q");
    }

    #[test]
    fn variant_sentences_enforced() {
        assert!(PromptTemplate::new(TemplateId::Step2Pass, format!("x {CENTER_SENTENCE}")).is_err());
        assert!(PromptTemplate::new(TemplateId::Step2Center, "no sentence").is_err());
        assert!(PromptTemplate::new(TemplateId::Step2Only, format!("{ONLY_SENTENCE} {CENTER_SENTENCE}")).is_err());
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = PromptTemplate::new(TemplateId::Step1, "{question}|{response_1}").unwrap();
        let mut v = BTreeMap::new();
        v.insert("question", "{response_1}".to_string());
        v.insert("response_1", "r".to_string());
        assert_eq!(t.render(&v).unwrap(), "{response_1}|r");
        v.remove("response_1");
        assert!(t.render(&v).is_err());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let set = TemplateSet::default();
        let json = serde_json::to_string(&set).unwrap();
        let back: TemplateSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn overrides_replace_single_templates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("random_baseline.txt"), "Shuffle: {response_1}\n").unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get(TemplateId::RandomBaseline).body(), "Shuffle: {response_1}");
        assert_eq!(set.get(TemplateId::Step1), TemplateSet::default().get(TemplateId::Step1));
    }
}
