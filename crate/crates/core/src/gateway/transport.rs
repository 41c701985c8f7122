use std::time::Duration;

/// A JSON POST request.
#[derive(Debug, Clone)]
pub struct HttpRequest<'a> {
    pub url: &'a str,
    pub body: &'a str,
    pub bearer: Option<&'a str>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    /// The server answered with a non-success status.
    Status { status: u16, body: String },
    /// The request never produced an HTTP response.
    Io(String),
}

impl TransportFailure {
    /// Worth retrying: connection problems, 429 and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportFailure::Io(_) => true,
            TransportFailure::Status { status, .. } => *status == 429 || *status >= 500,
        }
    }
}

/// Something that can deliver a JSON POST and return the response body.
pub trait Transport: Send + Sync {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<String, TransportFailure>;
}

/// Blocking HTTP transport.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new().build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        let mut req = self
            .agent
            .post(request.url)
            .timeout(request.timeout)
            .set("Content-Type", "application/json");
        if let Some(token) = request.bearer {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_string(request.body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| TransportFailure::Io(format!("reading body: {e}"))),
            Err(ureq::Error::Status(status, resp)) => Err(TransportFailure::Status {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => Err(TransportFailure::Io(t.to_string())),
        }
    }
}

/// Transport that refuses every request; used for cache-only replays.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNetwork;

impl Transport for NoNetwork {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        Err(TransportFailure::Io(format!("network disabled, refusing {}", request.url)))
    }
}
