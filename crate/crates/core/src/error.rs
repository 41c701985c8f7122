use std::path::PathBuf;

use thiserror::Error;

/// A value violated a type invariant or an operation precondition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid input: {message}")]
pub struct InvalidInput {
    pub message: String,
}

impl InvalidInput {
    pub fn new(message: impl Into<String>) -> Self {
        InvalidInput {
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ContrastError {
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
    #[error("comparison {comparison_id} cannot be oriented: both responses scored {reward}")]
    Unorientable { comparison_id: String, reward: f64 },
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset `{0}` has no usable records")]
    Empty(String),
    #[error("cannot sample {requested} comparisons from a population of {available}")]
    Sampling { requested: usize, available: usize },
    #[error("no reward for model `{model}` on comparison `{comparison}`")]
    MissingReward { model: String, comparison: String },
    #[error("invalid dataset spec: {0}")]
    Spec(String),
    #[error("registry {path}: {message}")]
    Registry { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s) to {url}: {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("{url} answered HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("endpoint returned an empty generation")]
    EmptyGeneration,
    #[error("endpoint returned an all-zero embedding")]
    DegenerateEmbedding,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed response from {url}: {message}")]
    Protocol { url: String, message: String },
    #[error("cache miss for digest {0} in offline mode")]
    CacheMiss(String),
    #[error("cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
}

impl GatewayError {
    /// Failures that indicate the endpoint could not be reached at all.
    pub fn is_transport(&self) -> bool {
        matches!(self, GatewayError::Transport { .. } | GatewayError::CacheMiss(_))
    }
}

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("step 1 output has no parsable `attribute: words` lines")]
    Step1Parse,
    #[error("template {template}: {message}")]
    Template { template: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("attribute discovery failed for every comparison")]
    Discovery,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Embedding(#[from] GatewayError),
    #[error("no original response for comparison `{0}`")]
    MissingOriginal(String),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("rank correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("rankings cover different attributes: {0}")]
    AttributeMismatch(String),
    #[error("need at least {needed} {what}, found {found}")]
    TooFew {
        what: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
}

#[derive(Debug, Error)]
pub enum RunStoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("replay incomplete, missing cache digests: {}", .0.join(", "))]
    ReplayIncomplete(Vec<String>),
    #[error("replay mismatch in: {}", .0.join(", "))]
    ReplayMismatch(Vec<String>),
}

impl RunStoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunStoreError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Top-level error of a pipeline run.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Contrast(#[from] ContrastError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    RunStore(#[from] RunStoreError),
    #[error(transparent)]
    Invalid(#[from] InvalidInput),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
