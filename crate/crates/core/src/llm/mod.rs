//! Chat-completion provider abstraction.
//!
//! [`LlmClient`] wraps a [`ChatProvider`] with bounded exponential-backoff
//! retries and a requests-per-minute ceiling, and [`LlmClient::cached_complete`]
//! adds a content-addressed JSON-lines response cache. Offline mock providers
//! live in [`mock`], the HTTP wire client in [`http`].

mod cache;
mod clock;
pub mod http;
mod limiter;
pub mod mock;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::hashing::json_hash;
use crate::rng::SeededRng;

pub use cache::{CacheEntry, CacheError, ResponseCache};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use limiter::{max_in_window, RateLimiter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_units: u32,
}

pub const DEFAULT_MAX_OUTPUT_UNITS: u32 = 256;

impl ChatRequest {
    /// Single user message at temperature 0.
    pub fn user(model_id: &str, content: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.to_string(),
            }],
            temperature: 0.0,
            max_output_units: DEFAULT_MAX_OUTPUT_UNITS,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        if self.model_id.is_empty() {
            return Err(LlmError::InvalidRequest("empty model id".into()));
        }
        Ok(())
    }

    /// The JSON body sent over the wire.
    pub fn body(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model_id,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_output_units,
        })
    }

    pub fn last_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub provider_meta: BTreeMap<String, serde_json::Value>,
    pub latency: Duration,
    pub from_cache: bool,
}

/// What a provider hands back for one successful call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProviderReply {
    pub text: String,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl ProviderReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallContext {
    pub repetition_index: u32,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("unknown input sentence: {0}")]
    UnknownInput(String),
    #[error("http {status}: {message}")]
    Http { status: u16, message: String },
}

impl ProviderError {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::RateLimited { .. } | ProviderError::Server { .. } | ProviderError::Transport(_)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Provider(ProviderError),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: ProviderError },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl LlmError {
    /// Errors after which continuing a sweep is pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            LlmError::Provider(ProviderError::Auth(_)) | LlmError::RetriesExhausted { .. } | LlmError::Cache(_)
        )
    }
}

/// Shareable across worker threads.
pub trait ChatProvider: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> String;

    fn send(&self, request: &ChatRequest, ctx: &CallContext) -> Result<ProviderReply, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the sleep after failed attempt `attempt` (0-based).
    pub fn cap(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt as i32))
    }

    /// Full jitter: uniform in `[0, cap(attempt)]`.
    pub fn delay(&self, attempt: u32, rng: &mut SeededRng) -> Duration {
        self.cap(attempt).mul_f64(rng.unit())
    }
}

/// Cache key over everything that determines a response.
pub fn cache_key(provider_id: &str, request: &ChatRequest, repetition_index: u32) -> String {
    json_hash(&serde_json::json!({
        "provider": provider_id,
        "body": request.body(),
        "repetition_index": repetition_index,
    }))
}

pub struct LlmClient {
    provider: Arc<dyn ChatProvider>,
    clock: Arc<dyn Clock>,
    limiter: Option<RateLimiter>,
    retry: RetryPolicy,
    seed: u64,
}

impl LlmClient {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            clock: Arc::new(SystemClock::default()),
            limiter: None,
            retry: RetryPolicy::default(),
            seed: 0,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        if let Some(l) = &self.limiter {
            self.limiter = Some(RateLimiter::new(l.limit(), l.window(), clock.clone()));
        }
        self.clock = clock;
        self
    }

    /// At most `per_minute` provider calls in any 60 s window.
    pub fn with_rate_limit(mut self, per_minute: u32) -> Self {
        self.limiter = Some(RateLimiter::new(per_minute, Duration::from_secs(60), self.clock.clone()));
        self
    }

    pub fn with_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Seed for backoff jitter.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn limiter(&self) -> Option<&RateLimiter> {
        self.limiter.as_ref()
    }

    pub fn complete(&self, request: &ChatRequest, repetition_index: u32) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = cache_key(&self.provider.id(), request, repetition_index);
        let mut jitter = SeededRng::for_purpose(self.seed, &format!("backoff/{key}"));
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.admit();
            }
            let started = self.clock.now();
            let ctx = CallContext {
                repetition_index,
                attempt,
            };
            match self.provider.send(request, &ctx) {
                Ok(reply) => {
                    return Ok(ChatResponse {
                        text: reply.text,
                        provider_meta: reply.meta,
                        latency: self.clock.now().saturating_sub(started),
                        from_cache: false,
                    })
                }
                Err(e) if e.is_transient() => {
                    attempt += 1;
                    if attempt >= self.retry.max_attempts {
                        return Err(LlmError::RetriesExhausted { attempts: attempt, last: e });
                    }
                    let wait = match &e {
                        ProviderError::RateLimited { retry_after: Some(d) } => *d,
                        _ => self.retry.delay(attempt - 1, &mut jitter),
                    };
                    log::warn!("provider call failed ({e}); retry {attempt} in {wait:?}");
                    self.clock.sleep(wait);
                }
                Err(e) => return Err(LlmError::Provider(e)),
            }
        }
    }

    /// [`complete`](Self::complete) behind the response cache. The key covers
    /// the provider id, the full request body and the repetition index.
    pub fn cached_complete(
        &self,
        request: &ChatRequest,
        cache: &ResponseCache,
        repetition_index: u32,
    ) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = cache_key(&self.provider.id(), request, repetition_index);
        if let Some(hit) = cache.get(&key) {
            let mut meta = BTreeMap::new();
            meta.insert("cached_at".to_string(), serde_json::json!(hit.timestamp));
            return Ok(ChatResponse {
                text: hit.response,
                provider_meta: meta,
                latency: Duration::ZERO,
                from_cache: true,
            });
        }
        let response = self.complete(request, repetition_index)?;
        cache.put(CacheEntry::new(
            key,
            &request.model_id,
            &response.text,
            self.clock.unix_time(),
        ))?;
        Ok(response)
    }
}
