//! HTTP completion client for OpenAI-style endpoints.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use serde_json::{json, Value};

use super::{ModelEndpoint, Protocol, RunnerError};

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    /// Transport failure, HTTP 429 or 5xx.
    Retryable(String),
    Fatal(String),
}

impl std::fmt::Display for CallError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CallError::Retryable(m) => write!(f, "retryable: {m}"),
            CallError::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

/// Anything that turns a prompt into text. Implementations must be usable
/// from several worker threads at once.
pub trait Completer: Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, CallError>;
}

pub struct HttpCompleter {
    client: Client,
    url: String,
    model: String,
    protocol: Protocol,
    api_key: Option<String>,
}

impl HttpCompleter {
    /// Resolves the credential from the endpoint's environment variable.
    pub fn new(endpoint: &ModelEndpoint) -> Result<Self, RunnerError> {
        endpoint.validate()?;
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| RunnerError::MissingCredential(var.clone()))?,
            ),
            None => None,
        };
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.request_timeout_secs))
            .build()
            .map_err(|e| RunnerError::Config(format!("http client: {e}")))?;
        let path = match endpoint.protocol {
            Protocol::Chat => "chat/completions",
            Protocol::Completion => "completions",
        };
        Ok(HttpCompleter {
            client,
            url: format!("{}/{path}", endpoint.base_url.trim_end_matches('/')),
            model: endpoint.model.clone(),
            protocol: endpoint.protocol,
            api_key,
        })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        match self.protocol {
            Protocol::Chat => json!({
                "model": self.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
            Protocol::Completion => json!({
                "model": self.model,
                "prompt": request.prompt,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
        }
    }
}

/// Pulls the generated text out of a response body.
pub fn extract_text(protocol: Protocol, body: &Value) -> Option<String> {
    let choice = body.get("choices")?.get(0)?;
    let text = match protocol {
        Protocol::Chat => choice.get("message")?.get("content")?,
        Protocol::Completion => choice.get("text")?,
    };
    text.as_str().map(str::to_string)
}

impl Completer for HttpCompleter {
    fn complete(&self, request: &CompletionRequest) -> Result<String, CallError> {
        let payload = serde_json::to_vec(&self.body(request)).map_err(|e| CallError::Fatal(e.to_string()))?;
        let mut req = self
            .client
            .post(&self.url)
            .header(CONTENT_TYPE, "application/json")
            .body(payload);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| CallError::Retryable(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| CallError::Retryable(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(CallError::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(CallError::Fatal(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| CallError::Fatal(format!("bad JSON: {e}")))?;
        extract_text(self.protocol, &body).ok_or_else(|| CallError::Fatal("response has no completion text".into()))
    }
}
