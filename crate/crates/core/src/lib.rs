//! Contrastive explanations for binary preferences of reward models.
//!
//! A comparison's two responses are rewritten along named evaluation
//! attributes, the rewrites are scored by the reward model under study, and
//! each rewrite is labelled a counterfactual (the preference flips) or a
//! semifactual (it does not). The labels are then aggregated into coverage
//! and distance metrics, per-attribute flip rates and local rankings.

pub mod analysis;
pub mod catalog;
pub mod contrast;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod metrics;
pub mod numeric;
pub mod perturbation;
pub mod pipeline;
pub mod runstore;
pub mod sampling;
pub mod types;

pub use catalog::{Attribute, AttributeCatalog};
pub use contrast::{categorize_perturbation, orient_comparison};
pub use error::{Error, Result};
pub use types::*;
