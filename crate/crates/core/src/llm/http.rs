//! HTTP clients for the common chat-completion and embedding wire format.

use std::time::Duration;

use serde_json::Value;

use super::{CallContext, ChatProvider, ChatRequest, ProviderError, ProviderReply};
use crate::metrics::{EmbeddingProvider, MetricsError};

/// Environment variables consulted for the bearer credential, in order.
pub const CREDENTIAL_VARS: [&str; 2] = ["ROPASUM_API_KEY", "OPENAI_API_KEY"];

pub const DEFAULT_CHAT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_EMBEDDING_ENDPOINT: &str = "https://api.openai.com/v1/embeddings";

pub fn credential_from_env() -> Option<String> {
    CREDENTIAL_VARS
        .iter()
        .find_map(|v| std::env::var(v).ok().filter(|s| !s.is_empty()))
}

fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client builds")
}

fn post(
    http: &reqwest::blocking::Client,
    endpoint: &str,
    credential: &str,
    body: &Value,
) -> Result<Value, ProviderError> {
    let resp = http
        .post(endpoint)
        .bearer_auth(credential)
        .json(body)
        .send()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let retry_after = resp
        .headers()
        .get("retry-after")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64);
    let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
    match status {
        200..=299 => serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string())),
        401 | 403 => Err(ProviderError::Auth(text)),
        429 => Err(ProviderError::RateLimited { retry_after }),
        500..=599 => Err(ProviderError::Server { status, message: text }),
        _ => Err(ProviderError::Http { status, message: text }),
    }
}

pub struct HttpProvider {
    endpoint: String,
    credential: String,
    http: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: &str, credential: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            credential: credential.to_string(),
            http: client(Duration::from_secs(120)),
        }
    }

    /// Credential from [`CREDENTIAL_VARS`].
    pub fn from_env(endpoint: &str) -> Result<Self, ProviderError> {
        let credential = credential_from_env()
            .ok_or_else(|| ProviderError::Auth(format!("set {} for the live provider", CREDENTIAL_VARS[0])))?;
        Ok(Self::new(endpoint, &credential))
    }
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn send(&self, request: &ChatRequest, _ctx: &CallContext) -> Result<ProviderReply, ProviderError> {
        let v = post(&self.http, &self.endpoint, &self.credential, &request.body())?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?;
        let mut reply = ProviderReply::text(text.trim());
        for field in ["id", "model", "usage", "system_fingerprint"] {
            if let Some(x) = v.get(field) {
                reply.meta.insert(field.to_string(), x.clone());
            }
        }
        Ok(reply)
    }
}

/// Token embeddings from a remote endpoint: POST {"model","input":[tokens]},
/// vectors read from `data[i].embedding`.
pub struct RemoteEmbedder {
    endpoint: String,
    credential: String,
    model: String,
    dimension: usize,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, credential: &str, model: &str, dimension: usize) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            credential: credential.to_string(),
            model: model.to_string(),
            dimension,
            http: client(Duration::from_secs(60)),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.endpoint, self.model)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let body = serde_json::json!({ "model": self.model, "input": tokens });
        let v = post(&self.http, &self.endpoint, &self.credential, &body)
            .map_err(|e| MetricsError::Provider(e.to_string()))?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| MetricsError::Provider("missing data array".into()))?;
        data.iter()
            .map(|d| {
                d.get("embedding")
                    .and_then(Value::as_array)
                    .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| MetricsError::Provider("bad embedding entry".into()))
            })
            .collect()
    }
}
