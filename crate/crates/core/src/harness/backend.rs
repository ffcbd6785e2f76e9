//! Chat backends: the request shape, the trait, and backend settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

/// Chat-completion request body: `{model, temperature, messages}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// A system + user exchange.
    pub fn new(model: &str, temperature: f64, system: &str, user: &str) -> Self {
        ChatRequest {
            model: model.to_string(),
            temperature,
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
        }
    }

    pub fn system_text(&self) -> &str {
        self.message("system")
    }

    pub fn user_text(&self) -> &str {
        self.message("user")
    }

    fn message(&self, role: &str) -> &str {
        self.messages.iter().find(|m| m.role == role).map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("missing credentials: environment variable `{0}` is not set")]
    MissingToken(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Decode(String),
    #[error("{0}")]
    Other(String),
}

impl BackendError {
    /// Worth another attempt: transport trouble, rate limits, server errors.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Anything that can answer a chat request with text.
pub trait Backend: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// Settings recorded alongside every run.
    fn metadata(&self) -> BackendMetadata;
}

/// Closures make throwaway backends for tests and embedding.
impl<F> Backend for F
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self(request)
    }

    fn metadata(&self) -> BackendMetadata {
        BackendMetadata {
            kind: "custom".into(),
            model: "custom".into(),
            temperature: DEFAULT_TEMPERATURE,
            flavor: None,
            endpoint: None,
            auth_env: None,
            auth_token: None,
            timeout_secs: None,
            max_retries: None,
            detail: None,
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// Vendor request/response shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiFlavor {
    /// `messages` array, bearer auth, reply in `choices[0].message.content`.
    #[default]
    Openai,
    /// Top-level `system`, `x-api-key`, reply in `content[].text`.
    Anthropic,
    /// `systemInstruction` + `contents`, `x-goog-api-key`, reply in
    /// `candidates[0].content.parts[].text`.
    Gemini,
}

impl ApiFlavor {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiFlavor::Openai => "openai",
            ApiFlavor::Anthropic => "anthropic",
            ApiFlavor::Gemini => "gemini",
        }
    }
}

impl fmt::Display for ApiFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApiFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "openai" | "chat" => Ok(ApiFlavor::Openai),
            "anthropic" => Ok(ApiFlavor::Anthropic),
            "gemini" | "google" => Ok(ApiFlavor::Gemini),
            other => Err(format!("unknown API flavor `{other}` (expected openai, anthropic or gemini)")),
        }
    }
}

/// Settings for a live chat endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub flavor: ApiFlavor,
    /// Full URL. `{model}` is replaced by the model name.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Environment variable holding the API token. Unset means no auth header.
    pub auth_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub retry_backoff_ms: u64,
    pub parallelism: usize,
    /// Required by the anthropic shape; ignored elsewhere.
    pub max_tokens: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            flavor: ApiFlavor::Openai,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: DEFAULT_TEMPERATURE,
            auth_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 120.0,
            max_retries: 3,
            retry_backoff_ms: 1000,
            parallelism: 4,
            max_tokens: 1024,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(format!("timeout_secs must be positive, got {}", self.timeout_secs));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature must be non-negative, got {}", self.temperature));
        }
        if self.endpoint.trim().is_empty() {
            return Err("endpoint is empty".into());
        }
        Ok(())
    }

    /// Endpoint with `{model}` filled in.
    pub fn url(&self) -> String {
        self.endpoint.replace("{model}", &self.model)
    }
}

pub const REDACTED: &str = "<redacted>";

/// Backend description stored with a run. Never holds a secret: the token
/// field is either absent or [`REDACTED`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendMetadata {
    /// `mock`, `http` or `custom`.
    pub kind: String,
    pub model: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<ApiFlavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    /// Backend-specific extras (mock perturbation, scale).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let r = ChatRequest::new("m", 1.0, "sys", "q");
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["model"], "m");
        assert_eq!(v["temperature"], 1.0);
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "q");
        assert_eq!(r.system_text(), "sys");
        assert_eq!(r.user_text(), "q");
    }

    #[test]
    fn retry_policy() {
        assert!(BackendError::Transport("reset".into()).is_retryable());
        assert!(BackendError::Status { status: 429, body: String::new() }.is_retryable());
        assert!(BackendError::Status { status: 503, body: String::new() }.is_retryable());
        assert!(!BackendError::Status { status: 401, body: String::new() }.is_retryable());
        assert!(!BackendError::Decode("x".into()).is_retryable());
    }

    #[test]
    fn config_from_toml() {
        let c: BackendConfig = toml::from_str(
            r#"
            flavor = "gemini"
            endpoint = "https://example.test/v1beta/models/{model}:generateContent"
            model = "gemini-flash"
            parallelism = 2
            "#,
        )
        .unwrap();
        assert_eq!(c.flavor, ApiFlavor::Gemini);
        assert_eq!(c.temperature, 1.0);
        assert_eq!(c.url(), "https://example.test/v1beta/models/gemini-flash:generateContent");
        assert!(c.validate().is_ok());
        assert!(BackendConfig { parallelism: 0, ..c }.validate().is_err());
        assert!(toml::from_str::<BackendConfig>("tokn = 'x'").is_err());
    }
}
