//! Global and local attribute sensitivity of reward models.

mod kendall;
mod local;
mod sensitivity;
mod split;

pub use kendall::kendall_tau;
pub use local::{local_ranking, representative_single_model, representative_two_models, LocalRanking, RepresentativeScore};
pub use sensitivity::{
    branch_correlation, cross_model_similarity, preference_flip_rate, ranking_tau, ranking_tau_on_shared,
    AttributeRanking, AttributeSensitivity, SensitivityReport, SimilarityMatrix,
};
pub use split::{correctness_split, preference_correct, win_rate, CorrectnessSplit, MetricBundle};
