//! OpenAI-style chat-completion transport.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{ChatRequest, ChatResponse, FinishReason, Role, Usage};

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// 429, 5xx, timeouts and connection failures.
    Transient { status: Option<u16>, message: String },
    Fatal { status: Option<u16>, message: String },
}

impl TransportError {
    pub fn status(&self) -> Option<u16> {
        match self {
            TransportError::Transient { status, .. } | TransportError::Fatal { status, .. } => *status,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            TransportError::Transient { message, .. } | TransportError::Fatal { message, .. } => message,
        }
    }
}

/// One round trip to a chat-completion backend.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    credential_env: String,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, credential_env: impl Into<String>, timeout: Duration) -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint: endpoint.into(),
            credential_env: credential_env.into(),
        }
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

pub(crate) fn request_body(request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| json!({"role": role_name(m.role), "content": m.content}))
        .collect();
    json!({
        "model": request.model_hint,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
    })
}

pub(crate) fn parse_body(body: &Value, latency_ms: u64) -> Result<ChatResponse, TransportError> {
    let fatal = |message: &str| TransportError::Fatal { status: None, message: message.to_string() };
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| fatal("response has no choices"))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Error,
    };
    let usage = Usage {
        input_tokens: body.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        output_tokens: body.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    if finish_reason == FinishReason::Stop && content.is_empty() {
        return Err(TransportError::Transient { status: None, message: "empty completion".into() });
    }
    Ok(ChatResponse { content, finish_reason, usage, latency_ms })
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let mut call = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.credential_env) {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let started = Instant::now();
        match call.send_json(request_body(request)) {
            Ok(resp) => {
                let body: Value = resp.into_json().map_err(|e| TransportError::Transient {
                    status: None,
                    message: format!("unreadable response body: {e}"),
                })?;
                parse_body(&body, started.elapsed().as_millis() as u64)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                let message = format!("HTTP {code}: {}", text.chars().take(500).collect::<String>());
                if code == 429 || code >= 500 {
                    Err(TransportError::Transient { status: Some(code), message })
                } else {
                    Err(TransportError::Fatal { status: Some(code), message })
                }
            }
            Err(ureq::Error::Transport(t)) => {
                Err(TransportError::Transient { status: None, message: t.to_string() })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_openai_style_body() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": "hi"}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 5, "completion_tokens": 1}
        });
        let r = parse_body(&body, 7).unwrap();
        assert_eq!(r.content, "hi");
        assert_eq!(r.usage, Usage { input_tokens: 5, output_tokens: 1 });
        assert_eq!(r.latency_ms, 7);
    }

    #[test]
    fn missing_choices_is_fatal() {
        assert!(matches!(parse_body(&json!({}), 0), Err(TransportError::Fatal { .. })));
    }
}
