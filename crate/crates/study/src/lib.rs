//! Runs whole studies: persona generation, parallel sessions, persistence,
//! survey scoring, aggregation, export, interviews and the HTTP API.

pub mod aggregate;
pub mod api;
pub mod config;
pub mod export;
pub mod record;
pub mod runner;
pub mod store;
pub mod sus;

pub use aggregate::{aggregate, row_for, AggregateRow, Aggregates, GroupSummary, MetricSummary};
pub use api::{router, serve};
pub use config::{MetricsConfig, PersonaInput, StudyConfig};
pub use export::{export_rows, import_rows, ExportFormat};
pub use record::{RunManifest, RunStatus, RunSummary, ScreenshotRef, SessionRecord, SessionStatus, StudyRun};
pub use runner::{ContextMemory, Gateways, InterviewOutcome, StudyRunner};
pub use store::RunStore;
pub use sus::{compute_sus, sus_from_survey, sus_questions, SusError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    Config(String),
    #[error("unknown run '{0}'")]
    UnknownRun(String),
    #[error("unknown agent '{0}'")]
    UnknownAgent(String),
    #[error("timestamp {at} is beyond the session's last timestamp {max}")]
    TimestampOutOfRange { at: u64, max: u64 },
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
    #[error("persona generation failed: {0}")]
    Persona(String),
    #[error("agent error: {0}")]
    Agent(String),
    #[error("import failed: {0}")]
    Import(String),
    #[error("storage: {0}")]
    Io(String),
}
