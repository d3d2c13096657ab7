//! Completion providers and the generation gateway.

mod gateway;
mod http;
mod mock;

pub use gateway::{CacheEntry, CacheKey, Gateway, GatewayConfig};
pub use http::HttpProvider;
pub use mock::{AdversarialProvider, FailingProvider, MockProvider, RecordingProvider};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptRequest;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f32,
    pub max_tokens: u32,
    #[serde(skip)]
    pub timeout: Duration,
}

impl GenParams {
    pub fn checkin() -> Self {
        Self { temperature: 0.7, max_tokens: 200, timeout: Duration::from_secs(10) }
    }

    pub fn journal() -> Self {
        Self { temperature: 0.7, max_tokens: 300, timeout: Duration::from_secs(10) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider timed out")]
    Timeout,
    #[error("bad provider response: {0}")]
    BadResponse(String),
}

/// Anything that turns a composed request into text.
pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, request: &PromptRequest, params: &GenParams) -> Result<String, ProviderError>;
}

impl<T: CompletionProvider + ?Sized> CompletionProvider for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, request: &PromptRequest, params: &GenParams) -> Result<String, ProviderError> {
        (**self).generate(request, params)
    }
}

/// Provider chosen by configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum ProviderConfig {
    Mock { seed: u64 },
    Http { url: String },
}

impl ProviderConfig {
    pub fn build(&self) -> std::sync::Arc<dyn CompletionProvider> {
        match self {
            ProviderConfig::Mock { seed } => std::sync::Arc::new(MockProvider::new(*seed)),
            ProviderConfig::Http { url } => std::sync::Arc::new(HttpProvider::new(url.clone())),
        }
    }
}
