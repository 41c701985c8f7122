//! Explanation-quality metrics: coverage, syntactic and semantic distance,
//! semantic diversity.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, InvalidInput, MetricsError};
use crate::gateway::{EndpointConfig, Gateway};
use crate::numeric::CompensatedSum;
use crate::types::{Comparison, ContrastLabel, ScoredExplanationSet, Side};

/// Case-folded split on Unicode whitespace. Punctuation stays attached.
pub fn word_tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Levenshtein distance over token sequences with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word-level edit distance divided by the longer token count; 0 for two
/// empty texts.
pub fn syntactic_distance(a: &str, b: &str) -> f64 {
    let ta = word_tokenize(a);
    let tb = word_tokenize(b);
    let longest = ta.len().max(tb.len());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(&ta, &tb) as f64 / longest as f64
}

/// Produces unit-length text embeddings.
pub trait Embedder: Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

/// Embeddings served by a gateway endpoint.
pub struct GatewayEmbedder<'a> {
    pub gateway: &'a Gateway,
    pub config: &'a EndpointConfig,
}

impl Embedder for GatewayEmbedder<'_> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.gateway.embed(self.config, text)
    }
}

/// Memoizes another embedder by exact text.
pub struct MemoEmbedder<'a> {
    inner: &'a dyn Embedder,
    memo: Mutex<HashMap<String, Vec<f64>>>,
}

impl<'a> MemoEmbedder<'a> {
    pub fn new(inner: &'a dyn Embedder) -> Self {
        MemoEmbedder {
            inner,
            memo: Mutex::default(),
        }
    }
}

impl Embedder for MemoEmbedder<'_> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if let Some(v) = self.memo.lock().expect("memo lock").get(text) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        self.memo
            .lock()
            .expect("memo lock")
            .insert(text.to_string(), v.clone());
        Ok(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine distance between unit embeddings: `1 - <e(a), e(b)>`.
pub fn semantic_distance(a: &str, b: &str, embedder: &dyn Embedder) -> Result<f64, MetricsError> {
    let ea = embedder.embed(a)?;
    let eb = embedder.embed(b)?;
    Ok(1.0 - dot(&ea, &eb))
}

/// Mean semantic distance over all unordered pairs; `None` with fewer than
/// two texts.
pub fn semantic_diversity(texts: &[&str], embedder: &dyn Embedder) -> Result<Option<f64>, MetricsError> {
    if texts.len() < 2 {
        return Ok(None);
    }
    let embeddings = texts
        .iter()
        .map(|t| embedder.embed(t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sum = CompensatedSum::new();
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            sum.add(1.0 - dot(&embeddings[i], &embeddings[j]));
        }
    }
    Ok(sum.mean())
}

/// Coverage of one label on one scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelCoverage {
    pub cf: f64,
    pub sf: f64,
    pub cf_count: usize,
    pub sf_count: usize,
}

impl LabelCoverage {
    fn from_counts(cf_count: usize, sf_count: usize, denominator: usize) -> Self {
        LabelCoverage {
            cf: cf_count as f64 / denominator as f64,
            sf: sf_count as f64 / denominator as f64,
            cf_count,
            sf_count,
        }
    }

    pub fn get(&self, label: ContrastLabel) -> f64 {
        match label {
            ContrastLabel::Counterfactual => self.cf,
            ContrastLabel::Semifactual => self.sf,
        }
    }
}

/// Fraction of comparisons with at least one counterfactual (semifactual)
/// among the chosen-side rewrites, the rejected-side rewrites, and both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub denominator: usize,
    pub chosen: LabelCoverage,
    pub rejected: LabelCoverage,
    pub both: LabelCoverage,
}

impl CoverageReport {
    pub fn side(&self, side: Side) -> &LabelCoverage {
        match side {
            Side::Chosen => &self.chosen,
            Side::Rejected => &self.rejected,
        }
    }
}

/// Every set counts in the denominator, including sets whose generation
/// failed and which therefore hold no perturbations.
pub fn coverage(sets: &[ScoredExplanationSet]) -> Result<CoverageReport, InvalidInput> {
    if sets.is_empty() {
        return Err(InvalidInput::new("coverage of an empty list of explanation sets"));
    }
    let n = sets.len();
    let count = |pred: &dyn Fn(&ScoredExplanationSet) -> bool| sets.iter().filter(|s| pred(s)).count();
    use ContrastLabel::{Counterfactual as CF, Semifactual as SF};
    Ok(CoverageReport {
        denominator: n,
        chosen: LabelCoverage::from_counts(
            count(&|s| s.has_label(Side::Chosen, CF)),
            count(&|s| s.has_label(Side::Chosen, SF)),
            n,
        ),
        rejected: LabelCoverage::from_counts(
            count(&|s| s.has_label(Side::Rejected, CF)),
            count(&|s| s.has_label(Side::Rejected, SF)),
            n,
        ),
        both: LabelCoverage::from_counts(
            count(&|s| s.has_label(Side::Chosen, CF) && s.has_label(Side::Rejected, CF)),
            count(&|s| s.has_label(Side::Chosen, SF) && s.has_label(Side::Rejected, SF)),
            n,
        ),
    })
}

/// How perturbations are grouped for semantic diversity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityGrouping {
    /// Within each (comparison, side, label) set, then averaged.
    #[default]
    PerLabelSet,
    /// Within each (comparison, side) set regardless of label.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub syntactic: Option<f64>,
    pub semantic: Option<f64>,
    pub diversity: Option<f64>,
    pub grouping: DiversityGrouping,
    /// Perturbations contributing to the distance means.
    pub perturbations: usize,
    /// Groups with at least two texts contributing to diversity.
    pub diversity_groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub grouping: DiversityGrouping,
    pub exclude_degenerate: bool,
}

/// Distances of every scored perturbation to its original response, pooled,
/// plus the mean semantic diversity of the chosen grouping.
///
/// `originals` maps comparison ids to the oriented comparisons the sets were
/// built from.
pub fn distance_report(
    sets: &[ScoredExplanationSet],
    originals: &HashMap<String, Comparison>,
    embedder: &dyn Embedder,
    options: DistanceOptions,
) -> Result<DistanceReport, MetricsError> {
    let memo = MemoEmbedder::new(embedder);
    let mut syntactic = CompensatedSum::new();
    let mut semantic = CompensatedSum::new();
    let mut diversity = CompensatedSum::new();
    for set in sets {
        let original = originals
            .get(&set.comparison_id)
            .ok_or_else(|| MetricsError::MissingOriginal(set.comparison_id.clone()))?;
        for side in Side::BOTH {
            let entries: Vec<_> = set
                .side_entries(side)
                .filter(|e| !(options.exclude_degenerate && e.perturbation.degenerate))
                .collect();
            let base = original.response(side);
            for e in &entries {
                syntactic.add(syntactic_distance(base, &e.perturbation.text));
                semantic.add(semantic_distance(base, &e.perturbation.text, &memo)?);
            }
            let groups: Vec<Vec<&str>> = match options.grouping {
                DiversityGrouping::Pooled => vec![entries.iter().map(|e| e.perturbation.text.as_str()).collect()],
                DiversityGrouping::PerLabelSet => [ContrastLabel::Counterfactual, ContrastLabel::Semifactual]
                    .iter()
                    .map(|l| {
                        entries
                            .iter()
                            .filter(|e| e.label == *l)
                            .map(|e| e.perturbation.text.as_str())
                            .collect()
                    })
                    .collect(),
            };
            for g in groups {
                if let Some(d) = semantic_diversity(&g, &memo)? {
                    diversity.add(d);
                }
            }
        }
    }
    Ok(DistanceReport {
        syntactic: syntactic.mean(),
        semantic: semantic.mean(),
        diversity: diversity.mean(),
        grouping: options.grouping,
        perturbations: syntactic.count(),
        diversity_groups: diversity.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{GeneratorKind, Perturbation, PromptVariant, RewardValue, ScoredPerturbation};

    #[test]
    fn tokenize_examples() {
        assert_eq!(word_tokenize("The cat sat."), ["the", "cat", "sat."]);
        assert_eq!(word_tokenize("a  b"), ["a", "b"]);
        assert!(word_tokenize("").is_empty());
        assert_eq!(word_tokenize("x\u{00A0}y\tz"), ["x", "y", "z"]);
    }

    #[test]
    fn syntactic_examples() {
        assert_eq!(syntactic_distance("the cat sat", "the cat sat"), 0.0);
        assert!((syntactic_distance("the cat sat", "the dog sat") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(syntactic_distance("a", "w x y z"), 1.0);
        assert_eq!(syntactic_distance("", ""), 0.0);
        assert_eq!(syntactic_distance("", "a b"), 1.0);
    }

    /// Embeds by counting the letters a..e; deterministic and non-negative.
    struct Letters;

    impl Embedder for Letters {
        fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
            let v: Vec<f64> = "abcde"
                .chars()
                .map(|c| text.chars().filter(|x| *x == c).count() as f64)
                .collect();
            crate::gateway::normalize(v)
        }
    }

    #[test]
    fn semantic_distance_basics() {
        assert!(semantic_distance("abc", "abc", &Letters).unwrap().abs() < 1e-12);
        assert!((semantic_distance("aa", "bb", &Letters).unwrap() - 1.0).abs() < 1e-12);
        let d1 = semantic_distance("aab", "bcd", &Letters).unwrap();
        let d2 = semantic_distance("bcd", "aab", &Letters).unwrap();
        assert_eq!(d1, d2);
        assert!(matches!(
            semantic_distance("zzz", "a", &Letters),
            Err(MetricsError::Embedding(GatewayError::DegenerateEmbedding))
        ));
    }

    #[test]
    fn diversity_examples() {
        assert!(semantic_diversity(&["ab", "ab"], &Letters).unwrap().unwrap().abs() < 1e-12);
        assert_eq!(semantic_diversity(&["ab"], &Letters).unwrap(), None);
        let d = semantic_distance("ab", "cd", &Letters).unwrap();
        let div = semantic_diversity(&["ab", "ab", "cd"], &Letters).unwrap().unwrap();
        assert!((div - (0.0 + d + d) / 3.0).abs() < 1e-12);
        let perm = semantic_diversity(&["cd", "ab", "ab"], &Letters).unwrap().unwrap();
        assert!((div - perm).abs() < 1e-15);
    }

    fn entry(side: Side, label: ContrastLabel, text: &str) -> ScoredPerturbation {
        ScoredPerturbation {
            perturbation: Perturbation {
                comparison_id: "c".into(),
                side,
                attribute: Some(format!("{side}-{text}")),
                text: text.into(),
                generator: GeneratorKind::AttributeConditioned,
                prompt_variant: PromptVariant::Center,
                relevant_words: None,
                degenerate: false,
            },
            reward: RewardValue::scalar(0.0),
            label,
        }
    }

    fn set(id: &str, entries: Vec<ScoredPerturbation>) -> ScoredExplanationSet {
        ScoredExplanationSet {
            comparison_id: id.into(),
            model_id: "m".into(),
            reward_chosen: RewardValue::scalar(1.0),
            reward_rejected: RewardValue::scalar(0.0),
            orientation_swapped: false,
            entries,
        }
    }

    #[test]
    fn coverage_counts() {
        use ContrastLabel::*;
        let sets = vec![
            set("1", vec![entry(Side::Chosen, Counterfactual, "a"), entry(Side::Rejected, Counterfactual, "b")]),
            set("2", vec![entry(Side::Chosen, Counterfactual, "a"), entry(Side::Rejected, Semifactual, "b")]),
            set("3", vec![entry(Side::Chosen, Counterfactual, "a")]),
            set("4", vec![]),
        ];
        let r = coverage(&sets).unwrap();
        assert_eq!(r.denominator, 4);
        assert_eq!(r.chosen.cf, 0.75);
        assert_eq!(r.chosen.sf, 0.0);
        assert_eq!(r.rejected.cf, 0.25);
        assert_eq!(r.rejected.sf, 0.25);
        assert_eq!(r.both.cf, 0.25);
        assert_eq!(r.both.sf, 0.0);
        assert!(coverage(&[]).is_err());
    }

    #[test]
    fn full_coverage() {
        use ContrastLabel::*;
        let sets: Vec<_> = (0..3)
            .map(|i| {
                set(
                    &i.to_string(),
                    vec![
                        entry(Side::Chosen, Counterfactual, "a"),
                        entry(Side::Chosen, Semifactual, "b"),
                        entry(Side::Rejected, Counterfactual, "c"),
                        entry(Side::Rejected, Semifactual, "d"),
                    ],
                )
            })
            .collect();
        let r = coverage(&sets).unwrap();
        for l in [r.chosen, r.rejected, r.both] {
            assert_eq!((l.cf, l.sf), (1.0, 1.0));
        }
    }

    #[test]
    fn distance_report_groupings() {
        use ContrastLabel::*;
        let original = Comparison::new("c", "q", "ab", "cd").unwrap();
        let originals = HashMap::from([("c".to_string(), original)]);
        let mut degenerate = entry(Side::Chosen, Semifactual, "ab");
        degenerate.perturbation.degenerate = true;
        let sets = vec![set(
            "c",
            vec![
                entry(Side::Chosen, Counterfactual, "aa"),
                entry(Side::Chosen, Counterfactual, "bb"),
                degenerate,
                entry(Side::Rejected, Semifactual, "cd"),
            ],
        )];
        let per = distance_report(&sets, &originals, &Letters, DistanceOptions::default()).unwrap();
        assert_eq!(per.perturbations, 4);
        // Only the chosen-side CF pair forms a group of two.
        assert_eq!(per.diversity_groups, 1);
        assert!((per.diversity.unwrap() - 1.0).abs() < 1e-12);
        let syn = (1.0 + 1.0 + 0.0 + 0.0) / 4.0;
        assert!((per.syntactic.unwrap() - syn).abs() < 1e-12);

        let pooled = distance_report(
            &sets,
            &originals,
            &Letters,
            DistanceOptions {
                grouping: DiversityGrouping::Pooled,
                exclude_degenerate: true,
            },
        )
        .unwrap();
        assert_eq!(pooled.perturbations, 3);
        assert_eq!(pooled.diversity_groups, 1);

        let missing = distance_report(&sets, &HashMap::new(), &Letters, DistanceOptions::default());
        assert!(matches!(missing, Err(MetricsError::MissingOriginal(_))));
    }
}
