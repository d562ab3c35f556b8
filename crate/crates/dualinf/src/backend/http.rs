//! HTTP client for chat-completions and embeddings providers.
//!
//! Speaks the widely deployed protocol: `POST {base_url}/chat/completions`
//! with a message list, response text in the first choice, and
//! `POST {base_url}/embeddings` for vectors. Credentials come from the
//! environment only (default `DUALINF_API_KEY`), never from flags or files.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{
    check_embedding_batch, BackendError, ChatBackend, ChatExchange, ChatRequest, EmbeddingBackend,
    TokenBucket, TokenUsage, API_KEY_ENV,
};

/// Connection settings for one remote backend.
#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable the API key is read from.
    pub api_key_env: String,
    pub requests_per_minute: Option<f64>,
    pub max_retries: u32,
    pub timeout: Duration,
}

impl HttpBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpBackendConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: API_KEY_ENV.to_string(),
            requests_per_minute: None,
            max_retries: 3,
            timeout: Duration::from_secs(120),
        }
    }
}

/// A remote chat backend with bounded exponential backoff and an optional
/// shared token-bucket limiter.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    limiter: Option<TokenBucket>,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

enum AttemptError {
    Fatal(BackendError),
    Retryable {
        message: String,
        delay: Option<Duration>,
    },
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let limiter = config.requests_per_minute.map(TokenBucket::per_minute);
        let api_key = std::env::var(&config.api_key_env).ok();
        Ok(HttpBackend {
            config,
            client,
            limiter,
            api_key,
        })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<String, AttemptError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut request = self.client.post(self.endpoint(path)).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| AttemptError::Retryable {
            message: e.to_string(),
            delay: None,
        })?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(AttemptError::Fatal(BackendError::Auth(format!(
                "HTTP {status} from {path}; check {}",
                self.config.api_key_env
            ))));
        }
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            let delay = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(AttemptError::Retryable {
                message: format!("HTTP 429 from {path}"),
                delay,
            });
        }
        if !status.is_success() {
            return Err(AttemptError::Retryable {
                message: format!("HTTP {status} from {path}"),
                delay: None,
            });
        }
        response.text().map_err(|e| AttemptError::Retryable {
            message: e.to_string(),
            delay: None,
        })
    }

    /// Runs the request with up to `max_retries` retries on retryable
    /// failures; backoff doubles from 500 ms, or honors a provider-advised
    /// delay.
    fn post_with_retries(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<String, BackendError> {
        let mut attempt = 0u32;
        loop {
            match self.post(path, body) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Retryable { message, delay }) => {
                    attempt += 1;
                    if attempt > self.config.max_retries {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message,
                        });
                    }
                    let backoff =
                        delay.unwrap_or_else(|| Duration::from_millis(500) * 2u32.pow(attempt - 1));
                    std::thread::sleep(backoff);
                }
            }
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, BackendError> {
        request.validate()?;
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        messages.push(json!({"role": "user", "content": request.user_text}));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        });
        let started = Instant::now();
        let raw = self.post_with_retries("chat/completions", &body)?;
        let parsed: ChatCompletionResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("no choices in response".into()))?;
        Ok(ChatExchange {
            request: request.clone(),
            response_text: choice.message.content,
            latency_ms: started.elapsed().as_millis() as u64,
            cache_hit: false,
            token_usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens.unwrap_or(0),
                completion_tokens: u.completion_tokens.unwrap_or(0),
            }),
        })
    }
}

/// Remote embedding backend over the `/embeddings` endpoint.
pub struct HttpEmbedder {
    backend: HttpBackend,
}

impl HttpEmbedder {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        Ok(HttpEmbedder {
            backend: HttpBackend::new(config)?,
        })
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::EmptyInput("embedding batch".into()));
        }
        let body = json!({"model": self.backend.config.model, "input": texts});
        let raw = self.backend.post_with_retries("embeddings", &body)?;
        let parsed: EmbeddingResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let vectors: Vec<Vec<f32>> = parsed.data.into_iter().map(|d| d.embedding).collect();
        check_embedding_batch(texts, &vectors)?;
        Ok(vectors)
    }
}
