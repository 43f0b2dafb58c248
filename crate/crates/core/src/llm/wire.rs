//! OpenAI-compatible chat-completions JSON shapes.

use serde::Deserialize;
use serde_json::{json, Value};

use super::{ChatRequest, LlmError};

/// Request body for `POST {base}/chat/completions`.
pub fn chat_completion_body(req: &ChatRequest) -> Value {
    json!({
        "model": req.model_id,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": req.user},
        ],
        "temperature": req.params.temperature,
        "top_p": req.params.top_p,
        "max_tokens": req.params.max_output_tokens,
        "stream": false,
    })
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
    refusal: Option<String>,
}

/// Extracts the first choice's text from a successful response body.
pub fn parse_chat_completion(body: &str) -> Result<String, LlmError> {
    let completion: Completion = serde_json::from_str(body)
        .map_err(|e| LlmError::Transport(format!("unparseable completion: {e}")))?;
    let choice = completion
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Transport("completion has no choices".into()))?;
    if let Some(refusal) = choice.message.refusal.filter(|r| !r.is_empty()) {
        return Err(LlmError::BackendRefused(refusal));
    }
    if choice.finish_reason.as_deref() == Some("content_filter") {
        return Err(LlmError::BackendRefused("content filter".into()));
    }
    if choice.finish_reason.as_deref() == Some("length") {
        log::warn!("completion truncated at max_tokens");
    }
    Ok(choice.message.content.unwrap_or_default())
}
