use serde::{Deserialize, Serialize};

use crate::error::LlmError;
use crate::schema::ResponseSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// Optional PNG attached to the message (screenshot-in-prompt mode).
    #[serde(skip)]
    pub image_png: Option<Vec<u8>>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into(), image_png: None }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into(), image_png: None }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into(), image_png: None }
    }

    pub fn with_image(mut self, png: Vec<u8>) -> Self {
        self.image_png = Some(png);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    pub max_output: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_schema: Option<ResponseSchema>,
    /// Free-form purpose tag ("action", "perceive", ...). Used for logging
    /// and by mock rules; never sent to a remote provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, temperature: 0.7, max_output: 1024, response_schema: None, label: None }
    }

    pub fn with_schema(mut self, schema: ResponseSchema) -> Self {
        self.response_schema = Some(schema);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_temperature(mut self, temperature: f32) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| LlmError::InvalidRequest("messages must not be empty".into()))?;
        if first.role == Role::Assistant {
            return Err(LlmError::InvalidRequest(
                "first message must be a system or user message".into(),
            ));
        }
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// All message contents joined with blank lines; what mock matchers see.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for (i, msg) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&msg.content);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rules() {
        assert!(ChatRequest::new(vec![]).validate().is_err());
        assert!(ChatRequest::new(vec![ChatMessage::assistant("hi")]).validate().is_err());
        assert!(ChatRequest::new(vec![ChatMessage::user("hi")]).validate().is_ok());
        let req = ChatRequest::new(vec![ChatMessage::system("s")]).with_temperature(-1.0);
        assert!(req.validate().is_err());
    }
}
