//! Text generation backends and prompt templates.

mod http;
mod mock;
mod templates;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use http::{HttpBackend, HttpConfig};
pub use mock::{MatchKind, Matcher, MockBackend, MockRule};
pub use templates::{TemplateError, Templates, TEMPLATE_IDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// Ordered chat messages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Conversation {
    messages: Vec<Message>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn user(text: impl Into<String>) -> Self {
        let mut c = Self::new();
        c.push_user(text);
        c
    }

    pub fn push(&mut self, role: Role, content: impl Into<String>) {
        self.messages.push(Message { role, content: content.into() });
    }

    pub fn push_user(&mut self, content: impl Into<String>) {
        self.push(Role::User, content);
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) {
        self.push(Role::Assistant, content);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimit,
    #[error("http error: {0}")]
    Http(String),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("no mock fixture rule matches prompt: {0:?}")]
    MockMiss(String),
    #[error("conversation is empty")]
    EmptyConversation,
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Failures worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Timeout | GatewayError::RateLimit | GatewayError::Http(_))
    }
}

/// A completion service.
pub trait Backend: Send + Sync {
    fn complete(&self, conv: &Conversation) -> Result<String, GatewayError>;
}

/// Shared handle to a backend with a call counter.
#[derive(Clone)]
pub struct GenerationGateway {
    backend: Arc<dyn Backend>,
    calls: Arc<AtomicU64>,
}

impl std::fmt::Debug for GenerationGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenerationGateway").field("calls", &self.calls()).finish()
    }
}

impl GenerationGateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self { backend: Arc::new(backend), calls: Arc::new(AtomicU64::new(0)) }
    }

    pub fn mock(backend: MockBackend) -> Self {
        Self::new(backend)
    }

    pub fn complete(&self, conv: &Conversation) -> Result<String, GatewayError> {
        if conv.is_empty() {
            return Err(GatewayError::EmptyConversation);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.backend.complete(conv)
    }

    /// Number of completion requests issued through this gateway and its
    /// clones.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
