//! Evaluation attributes along which responses are perturbed.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::InvalidInput;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub description: String,
}

impl Attribute {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            description: description.into(),
        }
    }
}

const DEFAULT_ATTRIBUTES: [(&str, &str); 15] = [
    ("avoid-to-answer", "whether or not the response is avoiding to give direct answers to the question"),
    ("appropriateness", "the extent to which the response is appropriate in terms of language style, politeness, and whether it contains any sarcasm"),
    ("assertiveness", "the extent to which the response sounds very certain and contains judgements"),
    ("clarity", "whether or not the response is clear and easy to read"),
    ("coherence", "whether or not the contents in the response are self-contained and clear"),
    ("complexity", "the intellectual burden required by a person to understand this response"),
    ("correctness", "whether or not the response is factually correct"),
    ("engagement", "the extent to which the language style of the response is trying to engage with the person who wrote the question"),
    ("harmlessness", "whether or not the response is relevant to any potentially unsafe, immoral or illegal behaviours"),
    ("helpfulness", "whether or not the response addresses the points raised in the question"),
    ("informativeness", "whether or not the response provides informative knowledge"),
    ("neutrality", "whether or not the response is neutral and is without biases towards certain groups"),
    ("relevance", "whether or not the response is in a relevant context as in the question"),
    ("sensitivity", "whether or not the response is relevant to any personal, sensitive, or private information"),
    ("verbosity", "how many relevant details are included in the response, and whether or not the response is too long"),
];

/// Ordered list of attributes with unique names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct AttributeCatalog {
    attributes: Vec<Attribute>,
}

impl AttributeCatalog {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, InvalidInput> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if a.name.is_empty() || a.name != a.name.to_lowercase() {
                return Err(InvalidInput::new(format!(
                    "attribute name `{}` must be a non-empty lowercase token",
                    a.name
                )));
            }
            if a.description.trim().is_empty() {
                return Err(InvalidInput::new(format!("attribute `{}` has no description", a.name)));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(InvalidInput::new(format!("duplicate attribute `{}`", a.name)));
            }
        }
        Ok(AttributeCatalog { attributes })
    }

    /// Read a catalog from a JSON array of `{name, description}` objects.
    pub fn from_json_file(path: &Path) -> Result<Self, InvalidInput> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InvalidInput::new(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| InvalidInput::new(format!("{}: {e}", path.display())))
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Case-insensitive lookup, used when parsing model output.
    pub fn find_ignore_case(&self, name: &str) -> Option<&Attribute> {
        let lowered = name.to_lowercase();
        self.attributes.iter().find(|a| a.name == lowered)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Hex SHA-256 of the catalog's canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(&self.attributes).expect("catalog serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

impl Default for AttributeCatalog {
    fn default() -> Self {
        let attributes = DEFAULT_ATTRIBUTES
            .iter()
            .map(|(n, d)| Attribute::new(*n, *d))
            .collect();
        AttributeCatalog { attributes }
    }
}

impl TryFrom<Vec<Attribute>> for AttributeCatalog {
    type Error = InvalidInput;

    fn try_from(value: Vec<Attribute>) -> Result<Self, Self::Error> {
        AttributeCatalog::new(value)
    }
}

impl From<AttributeCatalog> for Vec<Attribute> {
    fn from(value: AttributeCatalog) -> Self {
        value.attributes
    }
}
