use std::time::Duration;

use thiserror::Error;

/// Failure reported by a single provider round trip.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("rate limited by provider")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider rejected the request: {0}")]
    Fatal(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, ProviderError::Fatal(_))
    }
}

/// Failure of a gateway call after retry handling.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("provider unavailable after {attempts} attempt(s): {last_error}")]
    ProviderUnavailable { attempts: u32, last_error: String },
    #[error("reply never satisfied the expected structure after {attempts} attempt(s): {last_error}")]
    SchemaViolation { attempts: u32, last_error: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}
