use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;

/// Exponential backoff with jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub base_ms: u64,
    pub multiplier: f64,
    pub cap_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base_ms: 500, multiplier: 2.0, cap_ms: 30_000 }
    }
}

impl Backoff {
    /// No waiting between attempts; used by tests and the mock provider.
    pub fn none() -> Self {
        Self { base_ms: 0, multiplier: 1.0, cap_ms: 0 }
    }

    /// Upper bound of the delay before retry number `retry` (0-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        let raw = self.base_ms as f64 * self.multiplier.powi(retry as i32);
        Duration::from_millis(raw.min(self.cap_ms as f64).max(0.0) as u64)
    }

    /// Jittered delay in `[ceiling/2, ceiling]`.
    pub fn delay(&self, retry: u32, jitter: f64) -> Duration {
        let ceiling = self.ceiling(retry);
        let factor = 0.5 + 0.5 * jitter.clamp(0.0, 1.0);
        ceiling.mul_f64(factor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_id: String,
    pub embed_model_id: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub backoff: Backoff,
    /// Requests per minute.
    #[serde(default = "default_rate")]
    pub rate_limit: f64,
    #[serde(default)]
    pub api_key: Option<String>,
}

fn default_retries() -> u32 {
    3
}

fn default_rate() -> f64 {
    600.0
}

impl ProviderConfig {
    pub const ENDPOINT_ENV: &'static str = "UXSIM_LLM_ENDPOINT";
    pub const KEY_ENV: &'static str = "UXSIM_LLM_KEY";
    pub const MODEL_ENV: &'static str = "UXSIM_LLM_MODEL";
    pub const EMBED_MODEL_ENV: &'static str = "UXSIM_EMBED_MODEL";

    /// Configuration for the in-process mock: no backoff, effectively unlimited rate.
    pub fn mock() -> Self {
        Self {
            endpoint: "mock://local".into(),
            model_id: "mock-chat".into(),
            embed_model_id: "mock-embed".into(),
            max_retries: 3,
            backoff: Backoff::none(),
            rate_limit: 1.0e9,
            api_key: None,
        }
    }

    /// Builds a configuration from `UXSIM_LLM_*` environment variables.
    /// Returns `None` when no endpoint is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(Self::ENDPOINT_ENV).ok()?;
        Some(Self {
            endpoint,
            model_id: std::env::var(Self::MODEL_ENV).unwrap_or_else(|_| "gpt-4o-mini".into()),
            embed_model_id: std::env::var(Self::EMBED_MODEL_ENV)
                .unwrap_or_else(|_| "text-embedding-3-small".into()),
            max_retries: default_retries(),
            backoff: Backoff::default(),
            rate_limit: default_rate(),
            api_key: std::env::var(Self::KEY_ENV).ok(),
        })
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.rate_limit <= 0.0 || !self.rate_limit.is_finite() {
            return Err(LlmError::InvalidConfig(format!(
                "rate_limit must be positive, got {}",
                self.rate_limit
            )));
        }
        if self.backoff.multiplier.is_nan() || self.backoff.multiplier < 1.0 {
            return Err(LlmError::InvalidConfig("backoff multiplier must be >= 1".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(LlmError::InvalidConfig("endpoint is empty".into()));
        }
        Ok(())
    }

    /// Minimum spacing between two dispatched requests.
    pub fn min_interval(&self) -> Duration {
        Duration::from_secs_f64(60.0 / self.rate_limit)
    }
}
