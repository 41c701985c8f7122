//! A transparent reward function with planted sensitivities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const HARM_TERMS: &[&str] = &["attack", "explosive", "hack", "illegal", "kill", "poison", "steal", "weapon"];
pub const RUDE_TERMS: &[&str] = &["dumb", "idiot", "ridiculous", "shut", "stupid", "whatever"];
pub const POLITE_TERMS: &[&str] = &["glad", "happy", "kindly", "please", "thank", "thanks"];
pub const DETAIL_TERMS: &[&str] = &["additionally", "because", "detail", "example", "specifically", "step"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub weight: f64,
    pub terms: Vec<String>,
}

impl Lexicon {
    pub fn new(weight: f64, terms: &[&str]) -> Self {
        Lexicon {
            weight,
            terms: terms.iter().map(|t| t.to_string()).collect(),
        }
    }
}

/// Reward = `length_weight * min(words, length_cap)` plus, per lexicon,
/// `weight * hits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRewardSpec {
    pub length_weight: f64,
    pub length_cap: usize,
    pub lexicons: BTreeMap<String, Lexicon>,
}

impl Default for ToyRewardSpec {
    fn default() -> Self {
        ToyRewardSpec {
            length_weight: 0.05,
            length_cap: 50,
            lexicons: BTreeMap::from([
                ("harm_terms".to_string(), Lexicon::new(-1.0, HARM_TERMS)),
                ("rude_terms".to_string(), Lexicon::new(-0.5, RUDE_TERMS)),
                ("polite_terms".to_string(), Lexicon::new(0.25, POLITE_TERMS)),
                ("detail_terms".to_string(), Lexicon::new(0.1, DETAIL_TERMS)),
            ]),
        }
    }
}

impl ToyRewardSpec {
    /// Lexicons must be lowercase and pairwise disjoint, weights finite.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        if !self.length_weight.is_finite() {
            return Err("length weight is not finite".into());
        }
        for (name, lexicon) in &self.lexicons {
            if !lexicon.weight.is_finite() {
                return Err(format!("lexicon {name}: weight is not finite"));
            }
            for term in &lexicon.terms {
                if term.is_empty() || *term != term.to_lowercase() {
                    return Err(format!("lexicon {name}: term `{term}` must be lowercase and non-empty"));
                }
                if let Some(other) = seen.insert(term, name) {
                    return Err(format!("term `{term}` is in both {other} and {name}"));
                }
            }
        }
        Ok(())
    }
}

/// Case-folded whitespace tokens with surrounding punctuation removed.
fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
}

/// Score a response; the prompt is ignored.
pub fn toy_reward(spec: &ToyRewardSpec, _prompt: &str, response: &str) -> f64 {
    let count = response.split_whitespace().count().min(spec.length_cap);
    let mut reward = spec.length_weight * count as f64;
    let tokens: Vec<String> = words(response).collect();
    for lexicon in spec.lexicons.values() {
        let hits = tokens.iter().filter(|t| lexicon.terms.iter().any(|x| x == *t)).count();
        reward += lexicon.weight * hits as f64;
    }
    reward
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let spec = ToyRewardSpec::default();
        spec.validate().unwrap();
        let ten = "one two three four five six seven eight nine ten";
        assert!((toy_reward(&spec, "", ten) - 0.5).abs() < 1e-12);
        let harm = format!("{ten} poison");
        assert!((toy_reward(&spec, "", &harm) - (0.05 * 11.0 - 1.0)).abs() < 1e-12);
        assert_eq!(toy_reward(&spec, "", ""), 0.0);
        assert!((toy_reward(&spec, "", "hello world") - 0.1).abs() < 1e-12);
    }

    #[test]
    fn case_and_punctuation_fold() {
        let spec = ToyRewardSpec::default();
        assert!((toy_reward(&spec, "", "Thanks!") - (0.05 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn length_cap() {
        let spec = ToyRewardSpec::default();
        let long = vec!["word"; 80].join(" ");
        assert!((toy_reward(&spec, "", &long) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn overlapping_lexicons_rejected() {
        let mut spec = ToyRewardSpec::default();
        spec.lexicons.insert("dup".into(), Lexicon::new(1.0, &["poison"]));
        assert!(spec.validate().is_err());
    }
}
