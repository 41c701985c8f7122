use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

/// Connection settings for one model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Sampling temperature, chat endpoints only.
    #[serde(default)]
    pub temperature: f64,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    /// Base delay of the exponential retry backoff.
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout: default_timeout(),
            max_retries: default_retries(),
            temperature: 0.0,
            auth_token_env: None,
            retry_backoff_ms: default_backoff_ms(),
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_retries(mut self, max_retries: u32, backoff_ms: u64) -> Self {
        self.max_retries = max_retries;
        self.retry_backoff_ms = backoff_ms;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.base_url.is_empty() {
            return Err(GatewayError::Config("base_url is empty".into()));
        }
        if !(self.timeout > 0.0) || !self.timeout.is_finite() {
            return Err(GatewayError::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!(
                "temperature must lie in [0, 2], got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn timeout_duration(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }

    pub(crate) fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }

    pub(crate) fn bearer_token(&self) -> Result<Option<String>, GatewayError> {
        match &self.auth_token_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set"))),
        }
    }
}

/// Weighted-sum scalarisation of vector rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarisationSpec {
    pub weights: Vec<f64>,
}

impl ScalarisationSpec {
    pub fn new(weights: Vec<f64>) -> Self {
        ScalarisationSpec { weights }
    }

    pub fn apply(&self, vector: &[f64]) -> Result<f64, GatewayError> {
        if vector.len() != self.weights.len() {
            return Err(GatewayError::Config(format!(
                "reward vector has {} components but {} scalarisation weights are configured",
                vector.len(),
                self.weights.len()
            )));
        }
        Ok(self.weights.iter().zip(vector).map(|(w, v)| w * v).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(EndpointConfig::new("http://x", "m").validate().is_ok());
        let mut c = EndpointConfig::new("http://x", "m");
        c.timeout = 0.0;
        assert!(c.validate().is_err());
        assert!(EndpointConfig::new("http://x", "m").with_temperature(2.5).validate().is_err());
    }

    #[test]
    fn url_join_strips_trailing_slash() {
        assert_eq!(EndpointConfig::new("http://h:1/", "m").url("/score"), "http://h:1/score");
    }

    #[test]
    fn scalarisation() {
        let s = ScalarisationSpec::new(vec![0.5, 0.5, 1.0]);
        assert_eq!(s.apply(&[2.0, 1.0, 0.0]).unwrap(), 1.5);
        assert!(ScalarisationSpec::new(vec![1.0, 1.0, 1.0]).apply(&[1.0, 2.0]).is_err());
    }
}
