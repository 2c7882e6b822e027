use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uxsim_core::{InterviewRecord, Persona, SurveyAnswer, TraceRecord};

use crate::config::StudyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Pending,
    Running,
    Terminated,
    Failed,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Terminated | SessionStatus::Failed)
    }
}

/// Screenshot of the page a step's decision was made on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotRef {
    pub step: usize,
    /// `{run_id}/{agent_id}/{file}`, served under `/api/screenshots/`.
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub agent_id: String,
    pub persona: Persona,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination_reason: Option<String>,
    #[serde(default)]
    pub action_trace: Vec<TraceRecord>,
    /// Memory stream file, relative to the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_trace: Option<String>,
    #[serde(default)]
    pub survey_answers: Vec<SurveyAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey_error: Option<String>,
    #[serde(default)]
    pub screenshots: Vec<ScreenshotRef>,
    #[serde(default)]
    pub interviews: Vec<InterviewRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

impl SessionRecord {
    pub fn pending(agent_id: impl Into<String>, persona: Persona) -> Self {
        Self {
            agent_id: agent_id.into(),
            persona,
            status: SessionStatus::Pending,
            termination_reason: None,
            action_trace: Vec::new(),
            reasoning_trace: None,
            survey_answers: Vec::new(),
            survey_error: None,
            screenshots: Vec::new(),
            interviews: Vec::new(),
            started_at: None,
            finished_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Completed | RunStatus::Failed)
    }
}

/// Run metadata as written to `run.json`; sessions live in their own files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Agent ids in persona order.
    #[serde(default)]
    pub agents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub run_id: String,
    pub config: StudyConfig,
    pub sessions: Vec<SessionRecord>,
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StudyRun {
    pub fn session(&self, agent_id: &str) -> Option<&SessionRecord> {
        self.sessions.iter().find(|s| s.agent_id == agent_id)
    }
}

/// One line of `GET /api/runs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub status: RunStatus,
    pub url: String,
    pub task: String,
    pub n_participants: usize,
    pub sessions_finished: usize,
    pub sessions_failed: usize,
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

impl From<&StudyRun> for RunSummary {
    fn from(r: &StudyRun) -> Self {
        Self {
            run_id: r.run_id.clone(),
            status: r.status,
            url: r.config.url.clone(),
            task: r.config.task.clone(),
            n_participants: r.config.n_participants,
            sessions_finished: r.sessions.iter().filter(|s| s.status.is_terminal()).count(),
            sessions_failed: r.sessions.iter().filter(|s| s.status == SessionStatus::Failed).count(),
            started_at: r.started_at,
            finished_at: r.finished_at,
        }
    }
}
