//! Memory stream, persona generation and the browsing agent.

pub mod agent;
pub mod memory;
pub mod persona;
pub mod prompts;

pub use memory::{
    recency, score, MemoryError, MemoryId, Scored, MemoryKind, MemoryPiece, MemoryStream, MemoryView, NewMemory, RetrievalQuery,
    RetrievalWeights, SourceModule,
};
pub use persona::{
    generate_batch, generate_persona, plan_assignments, quota_counts, sample_demographics, Assignment, BatchOptions,
    DemographicField, DemographicSpec, Persona, PersonaBatch, PersonaError, Provenance, SamplingMode, WeightedValue, EXAMPLE_PERSONA,
};
pub use prompts::{PromptError, PromptKind, PromptSet};
pub use agent::{
    Agent, AgentConfig, AgentDecision, AgentError, AgentState, AgentStatus, AnswerValue, CaptureLog, CapturedPrompt,
    InterviewRecord, Plan, QuestionKind, SessionOutcome, SlowLoopConfig, StepRecord, SurveyAnswer, SurveyError,
    SurveyQuestion, TraceRecord, validate_questions,
};
