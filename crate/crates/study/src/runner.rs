use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use futures::StreamExt;
use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};
use uxsim_core::{
    generate_batch, Agent, AgentConfig, AgentError, AgentStatus, BatchOptions, InterviewRecord, Persona, PersonaError,
    PromptSet, SessionOutcome,
};
use uxsim_llm::Gateway;
use uxsim_web::{BrowserFactory, ConnectorConfig, WebConnector};

use crate::aggregate::{aggregate, Aggregates};
use crate::config::StudyConfig;
use crate::export::ExportFormat;
use crate::record::{RunManifest, RunStatus, ScreenshotRef, SessionRecord, SessionStatus, StudyRun};
use crate::store::RunStore;
use crate::StudyError;

type SessionGatewayFn = dyn Fn(&str, &str) -> Arc<Gateway> + Send + Sync;

/// Which gateway each part of a study talks to.
#[derive(Clone)]
pub struct Gateways {
    personas: Arc<Gateway>,
    sessions: Arc<SessionGatewayFn>,
}

impl std::fmt::Debug for Gateways {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateways").finish_non_exhaustive()
    }
}

impl Gateways {
    /// One gateway (and one rate limit) for everything.
    pub fn shared(gateway: Arc<Gateway>) -> Self {
        let g = gateway.clone();
        Self { personas: gateway, sessions: Arc::new(move |_, _| g.clone()) }
    }

    /// `sessions(run_id, agent_id)` picks the gateway for one participant,
    /// e.g. a fresh scripted mock per session.
    pub fn per_session(personas: Arc<Gateway>, sessions: impl Fn(&str, &str) -> Arc<Gateway> + Send + Sync + 'static) -> Self {
        Self { personas, sessions: Arc::new(sessions) }
    }

    pub fn personas(&self) -> &Arc<Gateway> {
        &self.personas
    }

    pub fn session(&self, run_id: &str, agent_id: &str) -> Arc<Gateway> {
        (self.sessions)(run_id, agent_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextMemory {
    pub id: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewOutcome {
    #[serde(flatten)]
    pub record: InterviewRecord,
    /// Memories placed in the prompt, when prompt capture was on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<ContextMemory>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

type Key = (String, String);

pub struct StudyRunner {
    store: RunStore,
    gateways: Gateways,
    prompts: Arc<PromptSet>,
    browsers: Arc<dyn BrowserFactory>,
    connector: ConnectorConfig,
    agent: AgentConfig,
    live: Mutex<HashMap<Key, Arc<Agent>>>,
    /// Serializes writers of one session record.
    record_locks: Mutex<HashMap<Key, Arc<tokio::sync::Mutex<()>>>>,
}

impl std::fmt::Debug for StudyRunner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StudyRunner").field("store", &self.store).field("live", &self.live.lock().len()).finish()
    }
}

fn agent_err(e: AgentError) -> StudyError {
    match e {
        AgentError::TimestampOutOfRange { at, max } => StudyError::TimestampOutOfRange { at, max },
        other => StudyError::Agent(other.to_string()),
    }
}

fn new_run_id() -> String {
    let id = uuid::Uuid::new_v4().simple().to_string();
    format!("{}-{}", Utc::now().format("%Y%m%dT%H%M%S"), &id[..8])
}

impl StudyRunner {
    pub fn new(store: RunStore, gateways: Gateways, browsers: Arc<dyn BrowserFactory>) -> Self {
        Self {
            store,
            gateways,
            prompts: Arc::new(PromptSet::default()),
            browsers,
            connector: ConnectorConfig::default(),
            agent: AgentConfig::default(),
            live: Mutex::default(),
            record_locks: Mutex::default(),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn with_connector_config(mut self, config: ConnectorConfig) -> Self {
        self.connector = config;
        self
    }

    /// Base agent settings; the step budget comes from each study config.
    pub fn with_agent_config(mut self, config: AgentConfig) -> Self {
        self.agent = config;
        self
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    pub fn live_agent(&self, run_id: &str, agent_id: &str) -> Option<Arc<Agent>> {
        self.live.lock().get(&(run_id.to_string(), agent_id.to_string())).cloned()
    }

    fn record_lock(&self, run_id: &str, agent_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.record_locks.lock().entry((run_id.to_string(), agent_id.to_string())).or_default().clone()
    }

    /// Validates and persists a new run without starting it.
    pub fn create_run(&self, mut config: StudyConfig) -> Result<String, StudyError> {
        config.validate()?;
        config.rng_seed.get_or_insert_with(|| rand::thread_rng().gen());
        let run_id = new_run_id();
        let manifest = RunManifest {
            run_id: run_id.clone(),
            status: RunStatus::Pending,
            started_at: Utc::now(),
            finished_at: None,
            error: None,
            agents: Vec::new(),
        };
        self.store.create_run(&manifest, &config)?;
        Ok(run_id)
    }

    pub async fn run_study(&self, config: StudyConfig) -> Result<StudyRun, StudyError> {
        let run_id = self.create_run(config)?;
        self.execute(&run_id).await
    }

    /// Creates a run and executes it in the background.
    pub fn launch(self: &Arc<Self>, config: StudyConfig) -> Result<String, StudyError> {
        let run_id = self.create_run(config)?;
        let me = self.clone();
        let id = run_id.clone();
        tokio::spawn(async move {
            if let Err(e) = me.execute(&id).await {
                warn!(run = %id, error = %e, "study run failed");
            }
        });
        Ok(run_id)
    }

    pub async fn execute(&self, run_id: &str) -> Result<StudyRun, StudyError> {
        let mut manifest = self.store.read_manifest(run_id)?;
        let config = self.store.read_config(run_id)?;
        manifest.status = RunStatus::Running;
        manifest.started_at = Utc::now();
        self.store.write_manifest(&manifest)?;
        info!(run = %run_id, n = config.n_participants, "study started");

        let participants = match self.personas(run_id, &config).await {
            Ok(p) => p,
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.error = Some(e.to_string());
                manifest.finished_at = Some(Utc::now());
                self.store.write_manifest(&manifest)?;
                return self.store.load_run(run_id);
            }
        };
        for (aid, persona) in &participants {
            self.store.write_session(run_id, &SessionRecord::pending(aid.clone(), persona.clone()))?;
        }
        manifest.agents = participants.iter().map(|(aid, _)| aid.clone()).collect();
        self.store.write_manifest(&manifest)?;

        futures::stream::iter(participants)
            .map(|(aid, persona)| self.run_one(run_id, &config, aid, persona))
            .buffer_unordered(config.parallelism)
            .collect::<Vec<_>>()
            .await;

        manifest.status = RunStatus::Completed;
        manifest.finished_at = Some(Utc::now());
        self.store.write_manifest(&manifest)?;
        let run = self.store.load_run(run_id)?;
        self.store.write_run_file(run_id, "aggregates.json", aggregate(&run).to_json().as_bytes())?;
        info!(run = %run_id, "study finished");
        Ok(run)
    }

    async fn personas(&self, run_id: &str, config: &StudyConfig) -> Result<Vec<(String, Persona)>, StudyError> {
        let example = config.example_persona.resolve()?;
        let options = BatchOptions { window: config.parallelism };
        let seed = config.rng_seed.unwrap_or(0);
        let gw = self.gateways.personas();
        let batch =
            match generate_batch(gw, &self.prompts, &config.demographic_spec, &example, config.n_participants, seed, options)
                .await
            {
                Ok(b) => b,
                Err(PersonaError::Incomplete { failed, batch }) => {
                    warn!(run = %run_id, failed, "continuing with the personas that were generated");
                    *batch
                }
                Err(e) => return Err(StudyError::Persona(e.to_string())),
            };
        batch.write_dir(&self.store.personas_dir(run_id)?).map_err(|e| StudyError::Io(e.to_string()))?;
        if batch.personas.is_empty() {
            return Err(StudyError::Persona("no persona could be generated".into()));
        }
        Ok(batch
            .provenance
            .iter()
            .filter(|p| p.error.is_none())
            .filter_map(|p| batch.generated(p.index).map(|persona| (p.index.to_string(), persona.clone())))
            .collect())
    }

    /// Runs one participant end to end. Failures end up in the record.
    async fn run_one(&self, run_id: &str, config: &StudyConfig, aid: String, persona: Persona) -> SessionRecord {
        let mut rec = SessionRecord::pending(aid.clone(), persona.clone());
        rec.status = SessionStatus::Running;
        rec.started_at = Some(Utc::now());
        self.persist(run_id, &rec);

        let agent_cfg = AgentConfig { step_budget: config.step_budget, ..self.agent.clone() };
        let task = Some(config.task.as_str()).filter(|t| !t.trim().is_empty());
        let agent = match Agent::new(self.gateways.session(run_id, &aid), self.prompts.clone(), persona, task, agent_cfg) {
            Ok(a) => Arc::new(a),
            Err(e) => {
                rec.status = SessionStatus::Failed;
                rec.termination_reason = Some(e.to_string());
                rec.finished_at = Some(Utc::now());
                self.persist(run_id, &rec);
                return rec;
            }
        };
        let key = (run_id.to_string(), aid.clone());
        self.live.lock().insert(key.clone(), agent.clone());

        let outcome = match self.browsers.launch().await {
            Ok(driver) => {
                let cc = ConnectorConfig { screenshots: config.screenshot_mode, ..self.connector.clone() };
                let mut connector = WebConnector::new(driver, cc);
                Some(agent.run_session(&mut connector, Some(&config.url)).await)
            }
            Err(e) => {
                rec.status = SessionStatus::Failed;
                rec.termination_reason = Some(format!("browser failed to start: {e}"));
                None
            }
        };
        if let Some(out) = &outcome {
            self.record_outcome(run_id, &mut rec, out);
            if !config.survey.is_empty() {
                match agent.answer_survey(&config.survey).await {
                    Ok(a) => rec.survey_answers = a,
                    Err(e) => {
                        warn!(run = %run_id, agent = %aid, error = %e, "survey failed");
                        rec.survey_error = Some(e.to_string());
                    }
                }
            }
            for q in &config.interview_protocol {
                if let Err(e) = agent.answer_interview(q, None).await {
                    warn!(run = %run_id, agent = %aid, error = %e, "protocol interview failed");
                }
            }
        }
        match self.store.write_memory(run_id, &aid, agent.stream()) {
            Ok(path) => rec.reasoning_trace = Some(path),
            Err(e) => warn!(error = %e, "memory stream not saved"),
        }
        if agent.capture().is_enabled() {
            if let Err(e) = self.store.write_capture(run_id, &aid, &agent.capture().to_jsonl()) {
                warn!(error = %e, "prompt capture not saved");
            }
        }

        let lock = self.record_lock(run_id, &aid);
        let _guard = lock.lock().await;
        rec.interviews = agent.interviews();
        rec.finished_at = Some(Utc::now());
        self.persist(run_id, &rec);
        self.live.lock().remove(&key);
        info!(run = %run_id, agent = %aid, status = ?rec.status, actions = rec.action_trace.len(), "session finished");
        rec
    }

    fn record_outcome(&self, run_id: &str, rec: &mut SessionRecord, out: &SessionOutcome) {
        rec.status = match out.status {
            AgentStatus::Terminated => SessionStatus::Terminated,
            AgentStatus::Failed | AgentStatus::Running => SessionStatus::Failed,
        };
        rec.termination_reason = out.termination_reason.clone();
        rec.action_trace = out.trace.clone();
        for step in &out.steps {
            let Some(png) = &step.screenshot else { continue };
            match self.store.write_screenshot(run_id, &rec.agent_id, step.index, png) {
                Ok(reference) => rec.screenshots.push(ScreenshotRef { step: step.index, reference }),
                Err(e) => warn!(error = %e, "screenshot not saved"),
            }
        }
        if let Err(e) = self.store.write_trace(run_id, &rec.agent_id, &out.trace) {
            warn!(error = %e, "action trace not saved");
        }
        if let Err(e) = self.store.write_steps(run_id, &rec.agent_id, &out.steps) {
            warn!(error = %e, "step records not saved");
        }
    }

    fn persist(&self, run_id: &str, rec: &SessionRecord) {
        if let Err(e) = self.store.write_session(run_id, rec) {
            warn!(run = %run_id, agent = %rec.agent_id, error = %e, "session record not saved");
        }
    }

    /// Asks one participant a question, optionally as of an earlier
    /// timestamp. Live sessions answer from their running agent, queued
    /// behind its slow loop; finished ones are rebuilt from disk.
    pub async fn interview(
        &self,
        run_id: &str,
        agent_id: &str,
        question: &str,
        at: Option<u64>,
    ) -> Result<InterviewOutcome, StudyError> {
        if question.trim().is_empty() {
            return Err(StudyError::InvalidQuestion("question must not be empty".into()));
        }
        if !self.store.exists(run_id) {
            return Err(StudyError::UnknownRun(run_id.to_string()));
        }
        let lock = self.record_lock(run_id, agent_id);
        let _guard = lock.lock().await;
        let mut rec = self.store.read_session(run_id, agent_id)?;
        let agent = match self.live_agent(run_id, agent_id) {
            Some(a) => a,
            None => {
                let config = self.store.read_config(run_id)?;
                let stream = self.store.read_memory(run_id, agent_id)?;
                let intent = if config.task.trim().is_empty() { rec.persona.intent.clone() } else { config.task.clone() };
                let cfg = AgentConfig { capture: true, slow_loop: None, ..self.agent.clone() };
                Arc::new(
                    Agent::with_stream(self.gateways.session(run_id, agent_id), self.prompts.clone(), rec.persona.clone(), intent, stream, cfg)
                        .map_err(agent_err)?,
                )
            }
        };
        let answer = agent.answer_interview(question, at).await.map_err(agent_err)?;
        let record = InterviewRecord { timestamp: at, question: question.trim().to_string(), answer };
        rec.interviews.push(record.clone());
        self.store.write_session(run_id, &rec)?;
        let captured = agent.capture().for_module("interview").pop();
        Ok(InterviewOutcome {
            record,
            context: captured
                .as_ref()
                .map(|c| c.retrieved.iter().map(|&(id, timestamp)| ContextMemory { id, timestamp }).collect()),
            prompt: captured.map(|c| c.text),
        })
    }

    pub fn aggregates(&self, run_id: &str) -> Result<Aggregates, StudyError> {
        Ok(aggregate(&self.store.load_run(run_id)?))
    }

    /// Writes `exports/aggregates.{ext}` and returns its path and bytes.
    pub fn export(&self, run_id: &str, format: ExportFormat) -> Result<(PathBuf, Vec<u8>), StudyError> {
        self.store.export(run_id, format)
    }
}
