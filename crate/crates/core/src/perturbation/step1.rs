use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::catalog::AttributeCatalog;
use crate::error::PerturbationError;

/// Relevant words per attribute, as identified in the first prompting step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Step1Result {
    pub words: BTreeMap<String, Vec<String>>,
}

impl Step1Result {
    /// Every catalog attribute mapped to an empty list.
    pub fn empty(catalog: &AttributeCatalog) -> Self {
        Step1Result {
            words: catalog.names().map(|n| (n.to_string(), Vec::new())).collect(),
        }
    }

    pub fn words_for(&self, attribute: &str) -> &[String] {
        self.words.get(attribute).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn strip_decoration(s: &str) -> &str {
    s.trim()
        .trim_start_matches(['-', '*', '•'])
        .trim()
        .trim_matches(|c| matches!(c, '\'' | '"' | '`' | '*'))
        .trim()
}

/// Parse `attribute: word1, word2, ...` lines.
///
/// Attribute names match the catalog case-insensitively; unknown names are
/// dropped with a warning. Word order is preserved.
pub fn parse_step1(raw: &str, catalog: &AttributeCatalog) -> Result<Step1Result, PerturbationError> {
    let mut result = Step1Result::empty(catalog);
    let mut parsable = 0usize;
    for line in raw.lines() {
        let Some((name, words)) = line.split_once(':') else {
            continue;
        };
        let name = strip_decoration(name);
        if name.is_empty() {
            continue;
        }
        parsable += 1;
        let Some(attribute) = catalog.find_ignore_case(name) else {
            warn!(attribute = name, "step 1 output names an attribute outside the catalog");
            continue;
        };
        let list = result.words.entry(attribute.name.clone()).or_default();
        list.extend(
            words
                .split(',')
                .map(strip_decoration)
                .filter(|w| !w.is_empty())
                .map(str::to_string),
        );
    }
    if parsable == 0 {
        return Err(PerturbationError::Step1Parse);
    }
    Ok(result)
}
