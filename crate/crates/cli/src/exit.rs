use rmcontrast::error::{
    AnalysisError, DatasetError, Error, GatewayError, MetricsError, PerturbationError, RunStoreError,
};

pub const OK: u8 = 0;
pub const OTHER: u8 = 1;
pub const USAGE: u8 = 2;
pub const TRANSPORT: u8 = 3;
pub const ANALYSIS: u8 = 4;

/// Flags or configuration that cannot work, found before any request.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// The run finished but some requests never reached their endpoint.
#[derive(Debug, thiserror::Error)]
#[error("{count} request(s) failed to reach their endpoint or missed the cache; results in {run} are incomplete")]
pub struct TransportFailures {
    pub count: usize,
    pub run: String,
}

/// An analysis could not produce its result.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct AnalysisFailure(pub String);

fn gateway_code(e: &GatewayError) -> u8 {
    match e {
        e if e.is_transport() => TRANSPORT,
        GatewayError::Status { .. } => TRANSPORT,
        GatewayError::Config(_) => USAGE,
        _ => OTHER,
    }
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Gateway(g) => gateway_code(g),
        Error::Perturbation(PerturbationError::Gateway(g)) => gateway_code(g),
        Error::Metrics(MetricsError::Embedding(g)) => gateway_code(g),
        Error::Analysis(AnalysisError::Metrics(MetricsError::Embedding(g))) => gateway_code(g),
        Error::Analysis(_) | Error::Metrics(_) => ANALYSIS,
        Error::RunStore(RunStoreError::ReplayIncomplete(_)) => TRANSPORT,
        Error::Dataset(DatasetError::Registry { .. } | DatasetError::Spec(_) | DatasetError::Sampling { .. }) => USAGE,
        Error::Config(_) | Error::Invalid(_) => USAGE,
        _ => OTHER,
    }
}

/// Process exit code for a failed command.
pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if cause.is::<TransportFailures>() {
            return TRANSPORT;
        }
        if cause.is::<AnalysisFailure>() || cause.is::<AnalysisError>() {
            return ANALYSIS;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<GatewayError>() {
            return gateway_code(e);
        }
        if let Some(RunStoreError::ReplayIncomplete(_)) = cause.downcast_ref::<RunStoreError>() {
            return TRANSPORT;
        }
        if let Some(DatasetError::Registry { .. } | DatasetError::Sampling { .. }) = cause.downcast_ref::<DatasetError>() {
            return USAGE;
        }
    }
    OTHER
}
