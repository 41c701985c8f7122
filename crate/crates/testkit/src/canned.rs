//! Fixed chat answers keyed by the markers embedded in test-mode prompts.

use std::path::Path;

use rmcontrast::perturbation::{FixtureMarker, MarkerKind};
use rmcontrast::Side;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Fixture {
    pub comparison: String,
    pub side: Side,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteFixture {
    pub comparison: String,
    pub side: Side,
    pub attribute: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverFixture {
    pub comparison: String,
    pub text: String,
}

/// Canned chat completions. Step 1 and discovery fall back to their
/// defaults; a rewrite without a fixture is an unknown key.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CannedPerturbationSpec {
    #[serde(default)]
    pub step1: Vec<Step1Fixture>,
    #[serde(default)]
    pub step1_default: Option<String>,
    #[serde(default)]
    pub rewrites: Vec<RewriteFixture>,
    /// Random-baseline answers, cycled by sample index.
    #[serde(default)]
    pub random: Vec<String>,
    #[serde(default)]
    pub discover: Vec<DiscoverFixture>,
    #[serde(default)]
    pub discover_default: Option<String>,
}

impl CannedPerturbationSpec {
    pub fn from_json_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        let texts = self
            .step1
            .iter()
            .map(|f| &f.text)
            .chain(self.rewrites.iter().map(|f| &f.text))
            .chain(&self.random)
            .chain(self.discover.iter().map(|f| &f.text));
        for t in texts {
            if t.trim().is_empty() {
                return Err("canned texts must be non-empty".into());
            }
        }
        Ok(())
    }

    pub fn rewrite(&self, comparison: &str, side: Side, attribute: &str) -> Option<&str> {
        self.rewrites
            .iter()
            .find(|f| f.comparison == comparison && f.side == side && f.attribute == attribute)
            .map(|f| f.text.as_str())
    }

    /// Answer for the marker in `prompt`, if any.
    pub fn answer(&self, prompt: &str) -> Option<String> {
        let marker = FixtureMarker::find_in(prompt)?;
        let side = marker.side;
        match marker.kind {
            MarkerKind::Step1 => self
                .step1
                .iter()
                .find(|f| f.comparison == marker.comparison && Some(f.side) == side)
                .map(|f| f.text.clone())
                .or_else(|| self.step1_default.clone()),
            MarkerKind::Step2 => self
                .rewrite(&marker.comparison, side?, marker.attribute.as_deref()?)
                .map(str::to_string),
            MarkerKind::Random => {
                if self.random.is_empty() {
                    return None;
                }
                let i = marker.sample.unwrap_or(0) as usize % self.random.len();
                Some(self.random[i].clone())
            }
            MarkerKind::Discover => self
                .discover
                .iter()
                .find(|f| f.comparison == marker.comparison)
                .map(|f| f.text.clone())
                .or_else(|| self.discover_default.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CannedPerturbationSpec {
        CannedPerturbationSpec {
            step1_default: Some("clarity: water".into()),
            rewrites: vec![RewriteFixture {
                comparison: "toy:1".into(),
                side: Side::Chosen,
                attribute: "clarity".into(),
                text: "rewritten".into(),
            }],
            random: vec!["r0".into(), "r1".into()],
            ..Default::default()
        }
    }

    #[test]
    fn answers_by_marker() {
        let s = spec();
        let m = FixtureMarker::new(MarkerKind::Step2, "toy:1")
            .side(Side::Chosen)
            .attribute("clarity");
        assert_eq!(s.answer(&m.attach("prompt")).as_deref(), Some("rewritten"));
        let unknown = FixtureMarker::new(MarkerKind::Step2, "toy:1")
            .side(Side::Chosen)
            .attribute("verbosity");
        assert_eq!(s.answer(&unknown.attach("p")), None);
        let step1 = FixtureMarker::new(MarkerKind::Step1, "toy:9").side(Side::Rejected);
        assert_eq!(s.answer(&step1.attach("p")).as_deref(), Some("clarity: water"));
        let random = FixtureMarker::new(MarkerKind::Random, "toy:1").side(Side::Chosen).sample(3);
        assert_eq!(s.answer(&random.attach("p")).as_deref(), Some("r1"));
        assert_eq!(s.answer("no marker"), None);
    }
}
