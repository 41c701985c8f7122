//! Attribute-conditioned generation of perturbed responses.
//!
//! For each side of an oriented comparison the generator first asks the
//! chat model which words of the response relate to each attribute, then
//! asks once per attribute for a rewrite that moves the response against
//! the reward model's verdict: the chosen response is made worse, the
//! rejected one better. A random-rewrite baseline and free-form attribute
//! discovery share the same transport.

mod generate;
mod prompts;
mod step1;
mod templates;

pub use generate::{FailureStage, GeneratedSets, GenerationFailure, Generator};
pub use prompts::{
    build_discovery_prompt, build_random_prompt, build_step1_prompt, build_step2_prompt, format_score,
    FixtureMarker, MarkerKind, OriginalRewards,
};
pub use step1::{parse_step1, Step1Result};
pub use templates::{PromptTemplate, TemplateId, TemplateSet, CENTER_SENTENCE, ONLY_SENTENCE, PLACEHOLDERS};
