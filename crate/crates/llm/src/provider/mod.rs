use async_trait::async_trait;

use crate::error::ProviderError;
use crate::request::ChatRequest;

pub mod http;
pub mod mock;

/// One chat/embedding backend. Implementations perform a single round trip;
/// retries and validation live in [`crate::Gateway`].
#[async_trait]
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    /// Raw (not necessarily normalized) embedding of `text`.
    async fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}
