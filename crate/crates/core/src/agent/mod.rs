//! The browsing agent: five reasoning modules over a shared memory stream,
//! a fast perceive-plan-act loop and a concurrent slow loop.

mod capture;
mod modules;
mod session;
mod survey;

use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use uxsim_llm::{EmbeddingVector, Gateway, LlmError};

use crate::memory::{MemoryError, MemoryKind, MemoryPiece, MemoryStream, RetrievalQuery, RetrievalWeights};
use crate::persona::Persona;
use crate::prompts::PromptSet;

pub use capture::{CaptureLog, CapturedPrompt};
pub use session::{SessionOutcome, StepRecord, TraceRecord};
pub use survey::{AnswerValue, InterviewRecord, QuestionKind, SurveyAnswer, SurveyError, SurveyQuestion, validate_questions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Running,
    Terminated,
    Failed,
}

impl AgentStatus {
    pub fn is_terminal(self) -> bool {
        self != AgentStatus::Running
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub rationale: String,
    pub next_step: usize,
}

impl Plan {
    pub fn current_step(&self) -> Option<&str> {
        self.steps.get(self.next_step).map(String::as_str)
    }

    /// Numbered steps with the next one marked; also the plan memory text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let marker = if i == self.next_step { " <- next" } else { "" };
            out.push_str(&format!("{}. {s}{marker}\n", i + 1));
        }
        if !self.rationale.is_empty() {
            out.push_str(&format!("Rationale: {}", self.rationale));
        }
        out.trim_end().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub persona: Persona,
    pub intent: String,
    pub current_plan: Option<Plan>,
    pub step_clock: u64,
    pub status: AgentStatus,
    pub termination_reason: Option<String>,
}

impl AgentState {
    pub fn new(persona: Persona, intent: String) -> Self {
        Self { persona, intent, current_plan: None, step_clock: 0, status: AgentStatus::Running, termination_reason: None }
    }

    /// Moves out of `Running` once; later calls are ignored.
    pub fn finish(&mut self, status: AgentStatus, reason: Option<String>) -> bool {
        if self.status != AgentStatus::Running || status == AgentStatus::Running {
            return false;
        }
        self.status = status;
        self.termination_reason = reason;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub action: uxsim_web::BrowserAction,
    pub description: String,
    /// Set when the decision is a fallback terminate after an invalid target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("intent must not be empty")]
    EmptyIntent,
    #[error("agent is not running")]
    NotRunning,
    #[error("reply did not match the expected format: {0}")]
    SchemaViolation(String),
    #[error("semantic id '{0}' is not on the current page")]
    InvalidTarget(String),
    #[error("step budget of {0} exhausted")]
    StepBudgetExceeded(usize),
    #[error("timestamp {at} is beyond the last memory ({max})")]
    TimestampOutOfRange { at: u64, max: u64 },
    #[error(transparent)]
    Gateway(LlmError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("browser: {0}")]
    Connector(String),
}

impl From<LlmError> for AgentError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::SchemaViolation { last_error, .. } => AgentError::SchemaViolation(last_error),
            other => AgentError::Gateway(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowLoopConfig {
    /// A pass starts once the fast loop has advanced this many steps since
    /// the previous pass began.
    pub every_steps: u64,
    pub reflect: bool,
    pub wonder: bool,
    pub importance: bool,
}

impl Default for SlowLoopConfig {
    fn default() -> Self {
        Self { every_steps: 3, reflect: true, wonder: true, importance: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub step_budget: usize,
    /// `None` runs the fast loop alone.
    pub slow_loop: Option<SlowLoopConfig>,
    pub fast_weights: RetrievalWeights,
    pub slow_weights: RetrievalWeights,
    pub survey_top_k: usize,
    /// Attach page screenshots to perception and action prompts.
    pub vision: bool,
    pub capture: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            step_budget: 50,
            slow_loop: Some(SlowLoopConfig::default()),
            fast_weights: RetrievalWeights::fast(),
            slow_weights: RetrievalWeights::slow(),
            survey_top_k: 40,
            vision: false,
            capture: std::env::var("UXSIM_CAPTURE_PROMPTS").is_ok_and(|v| v == "1"),
        }
    }
}

/// One simulated participant. Methods take `&self` so the two loops can run
/// side by side on the same agent.
pub struct Agent {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptSet>,
    stream: MemoryStream,
    state: Mutex<AgentState>,
    config: AgentConfig,
    capture: CaptureLog,
    interviews: Mutex<Vec<InterviewRecord>>,
    /// Held by each slow-loop pass and by interviews, so interviews on a
    /// live session queue behind the slow loop.
    slow_gate: tokio::sync::Mutex<()>,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent").field("state", &*self.state.lock()).field("memories", &self.stream.len()).finish()
    }
}

impl Agent {
    pub fn new(
        gateway: Arc<Gateway>,
        prompts: Arc<PromptSet>,
        persona: Persona,
        task: Option<&str>,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        let intent = task.map(str::to_string).unwrap_or_else(|| persona.intent.clone());
        Self::with_stream(gateway, prompts, persona, intent, MemoryStream::new(), config)
    }

    /// Rebuilds an agent around an existing stream, e.g. to interview a
    /// finished session.
    pub fn with_stream(
        gateway: Arc<Gateway>,
        prompts: Arc<PromptSet>,
        persona: Persona,
        intent: String,
        stream: MemoryStream,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        if intent.trim().is_empty() {
            return Err(AgentError::EmptyIntent);
        }
        config.fast_weights.validate()?;
        config.slow_weights.validate()?;
        let mut state = AgentState::new(persona, intent.trim().to_string());
        state.step_clock = stream.clock();
        Ok(Self {
            gateway,
            prompts,
            stream,
            state: Mutex::new(state),
            capture: CaptureLog::new(config.capture),
            config,
            interviews: Mutex::new(Vec::new()),
            slow_gate: tokio::sync::Mutex::new(()),
        })
    }

    pub fn stream(&self) -> &MemoryStream {
        &self.stream
    }

    pub fn state(&self) -> AgentState {
        self.state.lock().clone()
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn capture(&self) -> &CaptureLog {
        &self.capture
    }

    pub fn interviews(&self) -> Vec<InterviewRecord> {
        self.interviews.lock().clone()
    }

    pub fn intent(&self) -> String {
        self.state.lock().intent.clone()
    }

    fn persona_text(&self) -> String {
        self.state.lock().persona.to_text()
    }

    /// Advances the logical clock by one step.
    pub fn tick(&self) -> u64 {
        let t = self.stream.tick();
        self.state.lock().step_clock = t;
        t
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, AgentError> {
        Ok(self.gateway.embed(text).await?)
    }

    async fn remember(&self, m: crate::memory::NewMemory) -> Result<MemoryPiece, AgentError> {
        let id = self.stream.append(m)?;
        Ok(self.stream.get(id).expect("just appended"))
    }

    async fn query(&self, text: &str, weights: &RetrievalWeights, now: u64) -> Result<RetrievalQuery, AgentError> {
        Ok(RetrievalQuery { query_text: text.to_string(), query_embedding: self.embed(text).await?, weights: weights.clone(), now })
    }

    /// Fast-loop retrieval keyed on the intent and the current plan step.
    pub async fn retrieve_fast(&self) -> Result<Vec<MemoryPiece>, AgentError> {
        let text = {
            let s = self.state.lock();
            match s.current_plan.as_ref().and_then(Plan::current_step) {
                Some(step) => format!("{} {step}", s.intent),
                None => s.intent.clone(),
            }
        };
        let q = self.query(&text, &self.config.fast_weights, self.stream.clock()).await?;
        Ok(self.stream.retrieve(&q)?)
    }
}

/// Memories as prompt lines, in the given order.
pub fn render_memories(pieces: &[MemoryPiece]) -> String {
    if pieces.is_empty() {
        return "(nothing yet)".into();
    }
    pieces.iter().map(render_memory).collect::<Vec<_>>().join("\n")
}

fn render_memory(p: &MemoryPiece) -> String {
    let kind = match p.kind {
        MemoryKind::Thought if p.is_wonder() => "wandering thought",
        k => k.as_str(),
    };
    format!("- [t={}] ({kind}) {}", p.timestamp, p.content.replace('\n', " / "))
}
