//! Blocking HTTP backend for live chat endpoints.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{ApiFlavor, Backend, BackendConfig, BackendError, BackendMetadata, ChatRequest, REDACTED};

const MAX_BACKOFF: Duration = Duration::from_secs(60);
const ANTHROPIC_VERSION: &str = "2023-06-01";

pub struct HttpBackend {
    config: BackendConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("token", &self.token.as_ref().map(|_| REDACTED))
            .finish()
    }
}

impl HttpBackend {
    /// Reads the token from `config.auth_env` (when set) and builds the client.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        let token = match &config.auth_env {
            Some(var) => match std::env::var(var) {
                Ok(t) if !t.trim().is_empty() => Some(t.trim().to_string()),
                _ => return Err(BackendError::MissingToken(var.clone())),
            },
            None => None,
        };
        Self::with_token(config, token)
    }

    /// Like [`HttpBackend::new`] with an explicit token.
    pub fn with_token(config: BackendConfig, token: Option<String>) -> Result<Self, BackendError> {
        config.validate().map_err(BackendError::Other)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend { config, token, client })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn send_once(&self, request: &ChatRequest) -> Result<String, (BackendError, Option<Duration>)> {
        let body = request_body(self.config.flavor, request, self.config.max_tokens);
        let mut builder = self.client.post(self.config.url()).json(&body);
        if let Some(token) = &self.token {
            builder = match self.config.flavor {
                ApiFlavor::Openai => builder.bearer_auth(token),
                ApiFlavor::Anthropic => builder.header("x-api-key", token),
                ApiFlavor::Gemini => builder.header("x-goog-api-key", token),
            };
        }
        if self.config.flavor == ApiFlavor::Anthropic {
            builder = builder.header("anthropic-version", ANTHROPIC_VERSION);
        }
        let response = builder.send().map_err(|e| (BackendError::Transport(e.to_string()), None))?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = response.text().map_err(|e| (BackendError::Transport(e.to_string()), None))?;
        if !(200..300).contains(&status) {
            let body: String = text.chars().take(500).collect();
            return Err((BackendError::Status { status, body }, retry_after));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| (BackendError::Decode(e.to_string()), None))?;
        response_text(self.config.flavor, &value).map_err(|e| (e, None))
    }
}

impl Backend for HttpBackend {
    /// Sends with up to `max_retries` retries on retryable failures, backing
    /// off exponentially and honouring `Retry-After`.
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut delay = Duration::from_millis(self.config.retry_backoff_ms);
        let mut attempt = 0;
        loop {
            match self.send_once(request) {
                Ok(text) => return Ok(text),
                Err((err, retry_after)) => {
                    if attempt >= self.config.max_retries || !err.is_retryable() {
                        return Err(err);
                    }
                    thread::sleep(retry_after.unwrap_or(delay).min(MAX_BACKOFF));
                    delay = (delay * 2).min(MAX_BACKOFF);
                    attempt += 1;
                }
            }
        }
    }

    fn metadata(&self) -> BackendMetadata {
        BackendMetadata {
            kind: "http".into(),
            model: self.config.model.clone(),
            temperature: self.config.temperature,
            flavor: Some(self.config.flavor),
            endpoint: Some(self.config.url()),
            auth_env: self.config.auth_env.clone(),
            auth_token: self.token.as_ref().map(|_| REDACTED.to_string()),
            timeout_secs: Some(self.config.timeout_secs),
            max_retries: Some(self.config.max_retries),
            detail: None,
        }
    }
}

/// JSON body for `request` in the vendor's shape.
pub fn request_body(flavor: ApiFlavor, request: &ChatRequest, max_tokens: u32) -> Value {
    match flavor {
        ApiFlavor::Openai => serde_json::to_value(request).expect("request serializes"),
        ApiFlavor::Anthropic => {
            let messages: Vec<Value> = request
                .messages
                .iter()
                .filter(|m| m.role != "system")
                .map(|m| json!({"role": m.role, "content": m.content}))
                .collect();
            json!({
                "model": request.model,
                "temperature": request.temperature,
                "max_tokens": max_tokens,
                "system": request.system_text(),
                "messages": messages,
            })
        }
        ApiFlavor::Gemini => {
            let contents: Vec<Value> = request
                .messages
                .iter()
                .filter(|m| m.role != "system")
                .map(|m| {
                    let role = if m.role == "assistant" { "model" } else { "user" };
                    json!({"role": role, "parts": [{"text": m.content}]})
                })
                .collect();
            json!({
                "systemInstruction": {"parts": [{"text": request.system_text()}]},
                "contents": contents,
                "generationConfig": {"temperature": request.temperature},
            })
        }
    }
}

/// Assistant text out of a vendor response body.
pub fn response_text(flavor: ApiFlavor, body: &Value) -> Result<String, BackendError> {
    let missing = |what: &str| BackendError::Decode(format!("no {what} in response"));
    let join_text = |parts: &Value, what: &str| -> Result<String, BackendError> {
        let texts: Vec<&str> =
            parts.as_array().ok_or_else(|| missing(what))?.iter().filter_map(|p| p["text"].as_str()).collect();
        if texts.is_empty() {
            Err(missing(what))
        } else {
            Ok(texts.concat())
        }
    };
    match flavor {
        ApiFlavor::Openai => body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| missing("choices[0].message.content")),
        ApiFlavor::Anthropic => join_text(&body["content"], "content[].text"),
        ApiFlavor::Gemini => join_text(&body["candidates"][0]["content"]["parts"], "candidates[0].content.parts"),
    }
}
