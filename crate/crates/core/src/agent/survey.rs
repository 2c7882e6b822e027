use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uxsim_llm::{extract_json, ChatMessage, ChatRequest, FieldKind, ResponseSchema};

use super::{render_memories, Agent, AgentError};
use crate::memory::MemoryPiece;
use crate::prompts::PromptKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Likert,
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyQuestion {
    pub id: String,
    pub kind: QuestionKind,
    pub text: String,
    /// Inclusive `(min, max)`; required for Likert items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<(i64, i64)>,
    /// e.g. `sus:3` for the third SUS item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurveyError {
    #[error("question '{0}': Likert items need a scale")]
    MissingScale(String),
    #[error("question '{0}': scale minimum must be below maximum")]
    BadScale(String),
    #[error("duplicate question id '{0}'")]
    DuplicateId(String),
    #[error("question ids and texts must not be empty")]
    Empty,
}

impl SurveyQuestion {
    pub fn likert(id: impl Into<String>, text: impl Into<String>, min: i64, max: i64) -> Self {
        Self { id: id.into(), kind: QuestionKind::Likert, text: text.into(), scale: Some((min, max)), instrument_tag: None }
    }

    pub fn open(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), kind: QuestionKind::Open, text: text.into(), scale: None, instrument_tag: None }
    }

    pub fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.instrument_tag = Some(tag.into());
        self
    }

    pub fn validate(&self) -> Result<(), SurveyError> {
        if self.id.trim().is_empty() || self.text.trim().is_empty() {
            return Err(SurveyError::Empty);
        }
        match (self.kind, self.scale) {
            (QuestionKind::Likert, None) => Err(SurveyError::MissingScale(self.id.clone())),
            (QuestionKind::Likert, Some((lo, hi))) if lo >= hi => Err(SurveyError::BadScale(self.id.clone())),
            _ => Ok(()),
        }
    }

    fn prompt_line(&self) -> String {
        match (self.kind, self.scale) {
            (QuestionKind::Likert, Some((lo, hi))) => {
                format!("{}: {} (whole number from {lo} to {hi})", self.id, self.text)
            }
            _ => format!("{}: {} (short text answer)", self.id, self.text),
        }
    }

    fn check(&self, v: &Value) -> Result<AnswerValue, String> {
        match (self.kind, self.scale) {
            (QuestionKind::Likert, Some((lo, hi))) => match v.as_i64() {
                Some(n) if (lo..=hi).contains(&n) => Ok(AnswerValue::Scale(n)),
                Some(n) => Err(format!("answer to '{}' must be within {lo}..={hi}, got {n}", self.id)),
                None => Err(format!("answer to '{}' must be a whole number from {lo} to {hi}", self.id)),
            },
            _ => match v.as_str().map(str::trim) {
                Some(s) if !s.is_empty() => Ok(AnswerValue::Text(s.to_string())),
                _ => Err(format!("answer to '{}' must be non-empty text", self.id)),
            },
        }
    }
}

pub fn validate_questions(questions: &[SurveyQuestion]) -> Result<(), SurveyError> {
    let mut seen = std::collections::BTreeSet::new();
    for q in questions {
        q.validate()?;
        if !seen.insert(q.id.as_str()) {
            return Err(SurveyError::DuplicateId(q.id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Scale(i64),
    Text(String),
}

impl AnswerValue {
    pub fn as_scale(&self) -> Option<i64> {
        match self {
            AnswerValue::Scale(n) => Some(*n),
            AnswerValue::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyAnswer {
    pub id: String,
    pub answer: AnswerValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub question: String,
    pub answer: String,
}

fn parse_answers(text: &str, questions: &[SurveyQuestion]) -> Result<Vec<SurveyAnswer>, String> {
    let value = extract_json(text)?;
    let items = value.get("answers").and_then(Value::as_array).ok_or("\"answers\" must be an array")?;
    let mut by_id = BTreeMap::new();
    for item in items {
        let id = match item.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err("each answer needs an \"id\"".into()),
        };
        by_id.insert(id, item.get("answer").cloned().unwrap_or(Value::Null));
    }
    questions
        .iter()
        .map(|q| {
            let v = by_id.get(&q.id).ok_or_else(|| format!("no answer for question '{}'", q.id))?;
            Ok(SurveyAnswer { id: q.id.clone(), answer: q.check(v)? })
        })
        .collect()
}

impl Agent {
    /// Answers a questionnaire from the whole session's memories.
    pub async fn answer_survey(&self, questions: &[SurveyQuestion]) -> Result<Vec<SurveyAnswer>, AgentError> {
        validate_questions(questions).map_err(|e| AgentError::SchemaViolation(e.to_string()))?;
        if questions.is_empty() {
            return Ok(Vec::new());
        }
        let lines: Vec<String> = questions.iter().map(SurveyQuestion::prompt_line).collect();
        let query_text = questions.iter().map(|q| q.text.as_str()).collect::<Vec<_>>().join(" ");
        let memories = if self.stream.is_empty() {
            Vec::new()
        } else {
            let weights = self.config.slow_weights.clone().with_top_k(self.config.survey_top_k);
            let q = self.query(&query_text, &weights, self.stream.clock()).await?;
            self.stream.retrieve(&q)?
        };
        let intent = self.intent();
        let text = self.prompts.render(
            PromptKind::Survey,
            &[
                ("persona", &self.persona_text()),
                ("intent", &intent),
                ("memories", &render_memories(&memories)),
                ("questions", &lines.join("\n")),
            ],
        );
        let req = ChatRequest::new(vec![ChatMessage::user(text)])
            .with_label("survey")
            .with_schema(ResponseSchema::new("survey").field("answers", FieldKind::Array));
        self.capture.record(&req, self.stream.clock(), &memories);
        Ok(self.gateway.complete_with(&req, |t| parse_answers(t, questions)).await?.value)
    }

    /// Answers `question` using only memories stamped at or before `at`
    /// (the whole stream when `None`). The exchange goes to the interview
    /// log, never to the memory stream.
    pub async fn answer_interview(&self, question: &str, at: Option<u64>) -> Result<String, AgentError> {
        let question = question.trim();
        if question.is_empty() {
            return Err(AgentError::SchemaViolation("question must not be empty".into()));
        }
        let _gate = self.slow_gate.lock().await;
        let max = self.stream.max_timestamp().unwrap_or(0).max(self.stream.clock());
        if let Some(t) = at {
            if t > max {
                return Err(AgentError::TimestampOutOfRange { at: t, max });
            }
        }
        let view = self.stream.snapshot_until(at.unwrap_or(max));
        let memories: Vec<MemoryPiece> = if view.is_empty() {
            Vec::new()
        } else {
            let q = self.query(question, &self.config.slow_weights, view.until()).await?;
            view.retrieve(&q)?
        };
        let intent = self.intent();
        let text = self.prompts.render(
            PromptKind::Interview,
            &[
                ("persona", &self.persona_text()),
                ("intent", &intent),
                ("memories", &render_memories(&memories)),
                ("question", question),
            ],
        );
        let req = ChatRequest::new(vec![ChatMessage::user(text)]).with_label("interview");
        self.capture.record(&req, view.until(), &memories);
        let answer = self
            .gateway
            .complete_with(&req, |t| {
                let t = t.trim();
                if t.is_empty() {
                    Err("the answer must not be empty".to_string())
                } else {
                    Ok(t.to_string())
                }
            })
            .await?
            .value;
        self.interviews.lock().push(InterviewRecord { timestamp: at, question: question.to_string(), answer: answer.clone() });
        Ok(answer)
    }
}
