use std::sync::Arc;

use rand::Rng;
use serde_json::Value;
use tracing::{debug, warn};

use crate::config::ProviderConfig;
use crate::embedding::EmbeddingVector;
use crate::error::{LlmError, ProviderError};
use crate::provider::ChatProvider;
use crate::ratelimit::RateLimiter;
use crate::request::{ChatMessage, ChatRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Parsed JSON when the request carried a response schema.
    pub structured: Option<Value>,
    /// Number of retries (transport or validation) spent on this call.
    pub retry_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub text: String,
    pub retry_count: u32,
}

/// Rate-limited, retrying front door to one provider. Safe to share across
/// sessions behind an `Arc`.
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    config: ProviderConfig,
    limiter: RateLimiter,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let limiter = RateLimiter::new(config.min_interval());
        Ok(Self { provider, config, limiter })
    }

    /// Gateway over the mock provider with [`ProviderConfig::mock`].
    pub fn mock(provider: Arc<dyn ChatProvider>) -> Self {
        Self::new(provider, ProviderConfig::mock()).expect("mock config is valid")
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Sends `req`; when it carries a response schema the reply is validated
    /// and re-prompted on failure.
    pub async fn complete(&self, req: &ChatRequest) -> Result<Completion, LlmError> {
        let schema = req.response_schema.clone();
        let parsed = self
            .complete_with(req, |text| match &schema {
                Some(s) => s.validate(text).map(Some),
                None => Ok(None),
            })
            .await?;
        Ok(Completion { text: parsed.text, structured: parsed.value, retry_count: parsed.retry_count })
    }

    /// Sends `req` and runs `parse` on the reply. A parse error is appended to
    /// the conversation and the model is asked again. Transport failures and
    /// parse failures share one budget of `max_retries`.
    pub async fn complete_with<T, F>(&self, req: &ChatRequest, parse: F) -> Result<Parsed<T>, LlmError>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        req.validate()?;
        let mut request = req.clone();
        if let Some(schema) = &req.response_schema {
            append_instructions(&mut request, &schema.instructions());
        }
        let max_retries = self.config.max_retries;
        let mut retries = 0u32;
        loop {
            self.limiter.acquire().await;
            match self.provider.chat(&request).await {
                Ok(text) => match parse(&text) {
                    Ok(value) => return Ok(Parsed { value, text, retry_count: retries }),
                    Err(problem) => {
                        if retries >= max_retries {
                            return Err(LlmError::SchemaViolation {
                                attempts: retries + 1,
                                last_error: problem,
                            });
                        }
                        debug!(label = ?req.label, %problem, "re-prompting after invalid reply");
                        request.messages.push(ChatMessage::assistant(text));
                        request.messages.push(ChatMessage::user(format!(
                            "Your previous reply could not be used: {problem}. Please answer again, following the required format exactly."
                        )));
                        retries += 1;
                    }
                },
                Err(err) => {
                    if !err.is_retryable() || retries >= max_retries {
                        return Err(LlmError::ProviderUnavailable {
                            attempts: retries + 1,
                            last_error: err.to_string(),
                        });
                    }
                    let mut delay = self.config.backoff.delay(retries, rand::thread_rng().gen());
                    if let ProviderError::RateLimited { retry_after: Some(after) } = &err {
                        delay = delay.max(*after);
                    }
                    warn!(label = ?req.label, error = %err, ?delay, "provider call failed, backing off");
                    tokio::time::sleep(delay).await;
                    retries += 1;
                }
            }
        }
    }

    /// Unit-normalized embedding of `text`.
    pub async fn embed(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        if text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("cannot embed empty text".into()));
        }
        let mut retries = 0u32;
        loop {
            self.limiter.acquire().await;
            match self.provider.embed(text).await {
                Ok(raw) => {
                    return EmbeddingVector::normalized(raw).ok_or_else(|| {
                        LlmError::ProviderUnavailable {
                            attempts: retries + 1,
                            last_error: "provider returned a zero embedding".into(),
                        }
                    })
                }
                Err(err) => {
                    if !err.is_retryable() || retries >= self.config.max_retries {
                        return Err(LlmError::ProviderUnavailable {
                            attempts: retries + 1,
                            last_error: err.to_string(),
                        });
                    }
                    let delay = self.config.backoff.delay(retries, rand::thread_rng().gen());
                    tokio::time::sleep(delay).await;
                    retries += 1;
                }
            }
        }
    }
}

fn append_instructions(request: &mut ChatRequest, instructions: &str) {
    if let Some(last) = request.messages.iter_mut().rev().find(|m| m.role != crate::Role::Assistant) {
        if !last.content.contains(instructions) {
            last.content.push_str("\n\n");
            last.content.push_str(instructions);
        }
    }
}
