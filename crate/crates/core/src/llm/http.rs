use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use super::{
    chat_completion_body, parse_chat_completion, BackendKind, ChatBackend, ChatRequest, LlmError,
};

/// Default environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ACSA_API_KEY";

/// Any server speaking the OpenAI chat-completions protocol.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

impl HttpBackend {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    /// Reads the key from `key_var` (or [`API_KEY_ENV`]); a missing key is
    /// allowed for local servers that do not check it.
    pub fn from_env(base_url: &str, key_var: Option<&str>) -> Result<Self, LlmError> {
        let key = std::env::var(key_var.unwrap_or(API_KEY_ENV)).ok();
        Self::new(base_url, key, Duration::from_secs(600))
    }
}

impl ChatBackend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let mut call = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&chat_completion_body(req));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let snippet: String = body.chars().take(300).collect();
        match status {
            s if s.is_success() => parse_chat_completion(&body),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(LlmError::Auth(snippet)),
            StatusCode::TOO_MANY_REQUESTS => Err(LlmError::RateLimited(snippet)),
            StatusCode::BAD_REQUEST
            | StatusCode::NOT_FOUND
            | StatusCode::PAYLOAD_TOO_LARGE
            | StatusCode::UNPROCESSABLE_ENTITY => {
                Err(LlmError::BackendRefused(format!("{status}: {snippet}")))
            }
            _ => Err(LlmError::Transport(format!("{status}: {snippet}"))),
        }
    }
}
