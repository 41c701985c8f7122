//! Fixture datasets with planted sensitivities for the toy reward.
//!
//! Under the default toy reward every chosen response scores 1.35 and every
//! rejected one -0.2. On the chosen side the harmlessness rewrite inserts
//! two harm terms (reward -0.55, a counterfactual) while every other rewrite
//! drops trailing words (reward at least 0.95, a semifactual). On the
//! rejected side the helpfulness rewrite is polite and detailed enough to
//! overtake the chosen response; every other rewrite adds a few neutral
//! words and stays below it.

use std::io;
use std::path::{Path, PathBuf};

use rmcontrast::{AttributeCatalog, Side};
use serde_json::json;

use crate::canned::{CannedPerturbationSpec, RewriteFixture};

pub const PLANTED_ATTRIBUTE: &str = "harmlessness";
pub const REJECTED_FLIP_ATTRIBUTE: &str = "helpfulness";

const THINGS: [&str; 8] = ["fern", "cactus", "orchid", "basil", "tulip", "bonsai", "ivy", "lily"];
const FILLER: [&str; 6] = ["it", "will", "grow", "fine", "soon", "enough"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedComparison {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

fn thing(i: usize) -> String {
    let base = THINGS[i % THINGS.len()];
    if i < THINGS.len() {
        base.to_string()
    } else {
        format!("{base}{}", i / THINGS.len())
    }
}

pub fn planted_comparisons(n: usize) -> Vec<PlantedComparison> {
    (0..n)
        .map(|i| {
            let t = thing(i);
            PlantedComparison {
                prompt: format!("How should I care for my {t}?"),
                chosen: format!(
                    "Thanks for asking. Water the {t} every morning because it needs steady moisture, for example about one cup."
                ),
                rejected: format!("Whatever, just water the {t} sometimes."),
            }
        })
        .collect()
}

/// JSONL text of the planted comparisons in the pairwise dataset format.
pub fn planted_jsonl(n: usize) -> String {
    planted_comparisons(n)
        .iter()
        .map(|c| json!({ "prompt": c.prompt, "chosen": c.chosen, "rejected": c.rejected }).to_string() + "\n")
        .collect()
}

fn chosen_rewrite(c: &PlantedComparison, i: usize, attribute: &str, j: usize) -> String {
    if attribute == PLANTED_ATTRIBUTE {
        return format!(
            "Thanks for asking. Water the {} every morning with poison because it needs a weapon, for example about one cup.",
            thing(i)
        );
    }
    let words: Vec<&str> = c.chosen.split_whitespace().collect();
    let keep = words.len() - (1 + j % 6);
    words[..keep].join(" ")
}

fn rejected_rewrite(c: &PlantedComparison, i: usize, attribute: &str, j: usize) -> String {
    if attribute == REJECTED_FLIP_ATTRIBUTE {
        return format!(
            "Please water the {} every morning because it needs moisture, for example one cup, thank you kindly.",
            thing(i)
        );
    }
    format!("{} {}", c.rejected, FILLER[..1 + j % 6].join(" "))
}

/// Canned chat answers for the planted dataset named `dataset` (ids
/// `<dataset>:<line>`), one rewrite per side and catalog attribute.
pub fn planted_canned(dataset: &str, n: usize, catalog: &AttributeCatalog) -> CannedPerturbationSpec {
    let mut rewrites = Vec::new();
    for (i, c) in planted_comparisons(n).iter().enumerate() {
        let id = format!("{dataset}:{}", i + 1);
        for (j, attribute) in catalog.names().enumerate() {
            rewrites.push(RewriteFixture {
                comparison: id.clone(),
                side: Side::Chosen,
                attribute: attribute.to_string(),
                text: chosen_rewrite(c, i, attribute, j),
            });
            rewrites.push(RewriteFixture {
                comparison: id.clone(),
                side: Side::Rejected,
                attribute: attribute.to_string(),
                text: rejected_rewrite(c, i, attribute, j),
            });
        }
    }
    CannedPerturbationSpec {
        step1: Vec::new(),
        step1_default: Some("harmlessness: water, moisture\nhelpfulness: morning, cup\nverbosity: example".into()),
        rewrites,
        random: vec![
            "Water it now and then.".into(),
            "Give it some water when the soil is dry.".into(),
            "Plants like water and light.".into(),
            "Keep it somewhere bright and water it weekly because roots rot.".into(),
        ],
        discover: Vec::new(),
        discover_default: Some("helpfulness, politeness\nverbosity".into()),
    }
}

/// Paths of a fixture written to disk.
#[derive(Debug, Clone)]
pub struct FixtureDir {
    pub root: PathBuf,
    pub registry: PathBuf,
    pub dataset: PathBuf,
    pub canned: PathBuf,
}

/// Write `<name>.jsonl`, a `datasets.toml` registry naming it, and
/// `canned.json` under `dir`.
pub fn write_planted_fixture(dir: &Path, name: &str, n: usize, catalog: &AttributeCatalog) -> io::Result<FixtureDir> {
    std::fs::create_dir_all(dir)?;
    let dataset = dir.join(format!("{name}.jsonl"));
    std::fs::write(&dataset, planted_jsonl(n))?;
    let registry = dir.join("datasets.toml");
    std::fs::write(
        &registry,
        format!("[datasets.{name}]\nformat = \"pairwise\"\npath = \"{name}.jsonl\"\n"),
    )?;
    let canned = dir.join("canned.json");
    let spec = planted_canned(name, n, catalog);
    std::fs::write(&canned, serde_json::to_string_pretty(&spec).expect("canned spec serializes"))?;
    Ok(FixtureDir {
        root: dir.to_path_buf(),
        registry,
        dataset,
        canned,
    })
}

/// One win-rate probe: an original response and a disrespectful rewrite.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WinRatePair {
    pub prompt: String,
    pub original: String,
    pub perturbed: String,
}

/// Twenty probes of which exactly eleven rewrites out-score their original
/// under the default toy reward; one of the rest is an exact tie.
pub fn winrate_pairs() -> Vec<WinRatePair> {
    (0..20)
        .map(|i| {
            let t = thing(i % THINGS.len());
            let original = format!("I would rather not advise on the {t} here.");
            let perturbed = match i {
                0..=10 => format!("{original} Look it up yourself then."),
                19 => format!("I would rather not advise about the {t} here."),
                _ => format!("Shut up, I would rather not advise on the {t} here."),
            };
            WinRatePair {
                prompt: format!("Can you help with my {t}?"),
                original,
                perturbed,
            }
        })
        .collect()
}

pub fn write_winrate_fixture(path: &Path) -> io::Result<()> {
    let text: String = winrate_pairs()
        .iter()
        .map(|p| serde_json::to_string(p).expect("pair serializes") + "\n")
        .collect();
    std::fs::write(path, text)
}
