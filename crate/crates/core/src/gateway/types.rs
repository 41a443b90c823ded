use serde::{Deserialize, Serialize};

use crate::canonical::{normalize_whitespace, sha256_hex, to_canonical_line};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub model_hint: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Free-form label such as `formalize:Thm_2:attempt:7`. Not hashed.
    pub request_tag: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), String> {
        match self.messages.first() {
            None => return Err("message list is empty".into()),
            Some(m) if m.role == Role::Assistant => {
                return Err("first message must be system or user".into())
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        Ok(())
    }

    /// Hash of the canonicalized request. Message content is whitespace
    /// normalized unless `strict` is set; the tag never participates.
    pub fn hash(&self, strict: bool) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            messages: Vec<Message>,
            model_hint: &'a str,
            temperature: f64,
            max_output_tokens: u32,
        }
        let messages = self
            .messages
            .iter()
            .map(|m| Message {
                role: m.role,
                content: if strict { m.content.clone() } else { normalize_whitespace(&m.content) },
            })
            .collect();
        let canon = Canon {
            messages,
            model_hint: &self.model_hint,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        };
        sha256_hex(to_canonical_line(&canon).expect("request serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    #[default]
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ChatResponse {
            content: content.into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            latency_ms: 0,
        }
    }
}
