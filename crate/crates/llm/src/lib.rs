//! Uniform access to chat-completion and text-embedding providers.
//!
//! A [`Gateway`] wraps any [`ChatProvider`] with rate limiting, retry with
//! exponential backoff, and structured-output validation. Two providers ship
//! with the crate: [`HttpProvider`] for chat-completions style HTTP endpoints
//! and [`MockProvider`], a fully deterministic scripted provider used by every
//! offline test.

mod config;
mod embedding;
mod error;
mod gateway;
mod provider;
mod ratelimit;
mod request;
mod schema;

pub use config::{Backoff, ProviderConfig};
pub use embedding::{hash_embedding, EmbeddingVector};
pub use error::{LlmError, ProviderError};
pub use gateway::{Completion, Gateway, Parsed};
pub use provider::http::HttpProvider;
pub use provider::mock::{MockProvider, MockRule, ScriptError};
pub use provider::ChatProvider;
pub use ratelimit::RateLimiter;
pub use request::{ChatMessage, ChatRequest, Role};
pub use schema::{extract_json, FieldKind, ResponseSchema};
