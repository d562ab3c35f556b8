//! Uniform access to chat-completion and embedding providers.
//!
//! Three implementations sit behind the [`ChatBackend`] trait: a
//! deterministic scripted backend for offline runs ([`ScriptedBackend`]),
//! an HTTP client speaking the common chat-completions protocol
//! ([`HttpBackend`]), and a caching wrapper ([`CachedBackend`]) that makes
//! reruns free and bit-identical.
//!
//! A request is identified by the digest of
//! `(backend_id, system_text, user_text, temperature, max_output)`.
//! Repeated sampling (self-consistency paths) sets `sample_index`, which
//! does not enter the base digest but suffixes the cache key so distinct
//! paths stay distinct across reruns.

mod cache;
mod embedding;
mod http;
mod ratelimit;
mod scripted;

pub use cache::{BackendStats, CachedBackend, ResponseCache};
pub use embedding::{HashEmbedder, ScriptedEmbedder};
pub use http::{HttpBackend, HttpBackendConfig, HttpEmbedder};
pub use ratelimit::TokenBucket;
pub use scripted::{ScriptedBackend, Transcript, TranscriptBuilder};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Default sampling temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
/// Default completion budget in tokens.
pub const DEFAULT_MAX_OUTPUT: u32 = 2048;
/// Environment variable holding the API key for remote backends.
pub const API_KEY_ENV: &str = "DUALINF_API_KEY";

/// Errors from backend calls and backend construction.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("unscripted prompt: no transcript entry for digest {digest}")]
    Unscripted { digest: String },
    #[error("scripted sequence for digest {digest} exhausted after {len} responses")]
    SequenceExhausted { digest: String, len: usize },
    #[error("duplicate transcript digest {digest} without a response sequence")]
    DuplicateDigest { digest: String },
    #[error("no scripted embedding for text {text:?}")]
    UnscriptedText { text: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BackendError {
    /// Fatal errors abort a whole run; everything else fails one note.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth(_))
    }
}

/// One chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub backend_id: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_output: u32,
    /// Distinguishes repeated sampling of the same prompt; not part of the
    /// base digest.
    #[serde(default)]
    pub sample_index: u32,
}

impl ChatRequest {
    pub fn new(
        backend_id: impl Into<String>,
        system_text: impl Into<String>,
        user_text: impl Into<String>,
    ) -> Self {
        ChatRequest {
            backend_id: backend_id.into(),
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_output: DEFAULT_MAX_OUTPUT,
            sample_index: 0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output(mut self, max_output: u32) -> Self {
        self.max_output = max_output;
        self
    }

    pub fn with_sample_index(mut self, sample_index: u32) -> Self {
        self.sample_index = sample_index;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.user_text.is_empty() {
            return Err(BackendError::InvalidRequest("user_text is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Hex digest of the canonical request tuple; `sample_index` excluded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&(
            &self.backend_id,
            &self.system_text,
            &self.user_text,
            self.temperature,
            self.max_output,
        ))
        .expect("request tuple serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Cache key: the digest, suffixed with the sample index when nonzero.
    pub fn cache_key(&self) -> String {
        if self.sample_index == 0 {
            self.digest()
        } else {
            format!("{}-p{}", self.digest(), self.sample_index)
        }
    }
}

/// Token counts reported by a provider, when available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One request/response pair; the cacheable unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response_text: String,
    pub latency_ms: u64,
    pub cache_hit: bool,
    pub token_usage: Option<TokenUsage>,
}

/// A chat-completion provider. Implementations must tolerate concurrent
/// callers.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, BackendError>;
}

/// An embedding provider mapping texts to fixed-dimension vectors.
pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError>;
}

/// Checks the one-vector-per-text and uniform-dimension postconditions.
pub(crate) fn check_embedding_batch(
    texts: &[String],
    vectors: &[Vec<f32>],
) -> Result<(), BackendError> {
    if texts.is_empty() {
        return Err(BackendError::EmptyInput("embedding batch".into()));
    }
    if vectors.len() != texts.len() {
        return Err(BackendError::MalformedResponse(format!(
            "{} vectors for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(BackendError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(BackendError::MalformedResponse(
                "non-finite embedding component".into(),
            ));
        }
    }
    Ok(())
}
