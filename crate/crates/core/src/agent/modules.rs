use serde_json::Value;
use tracing::{debug, warn};
use uxsim_llm::{extract_json, ChatMessage, ChatRequest, FieldKind, ResponseSchema};
use uxsim_web::{ActionVariant, BrowserAction, ObservationPayload};

use super::{render_memories, Agent, AgentDecision, AgentError, AgentStatus, Plan};
use crate::memory::{MemoryId, MemoryPiece, NewMemory, SourceModule};
use crate::prompts::PromptKind;

pub(crate) const EMPTY_PAGE: &str = "The page appears empty.";

fn object(text: &str) -> Result<serde_json::Map<String, Value>, String> {
    match extract_json(text)? {
        Value::Object(m) => Ok(m),
        _ => Err("reply must be a JSON object".into()),
    }
}

fn nonempty_str(obj: &serde_json::Map<String, Value>, field: &str) -> Result<String, String> {
    match obj.get(field).and_then(Value::as_str).map(str::trim) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(format!("\"{field}\" must be a non-empty string")),
    }
}

fn string_list(obj: &serde_json::Map<String, Value>, field: &str) -> Result<Vec<String>, String> {
    let items = obj.get(field).and_then(Value::as_array).ok_or_else(|| format!("\"{field}\" must be an array"))?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item.as_str().map(str::trim) {
            Some(s) if !s.is_empty() => out.push(s.to_string()),
            _ => return Err(format!("\"{field}\" must contain only non-empty strings")),
        }
    }
    Ok(out)
}

fn parse_plan(text: &str, min_steps: usize) -> Result<Plan, String> {
    let obj = object(text)?;
    let steps = string_list(&obj, "steps")?;
    if steps.len() < min_steps {
        return Err(format!("a plan needs at least {min_steps} steps, got {}", steps.len()));
    }
    let rationale = obj.get("rationale").and_then(Value::as_str).unwrap_or("").trim().to_string();
    let next_step = match obj.get("next_step") {
        None | Some(Value::Null) => 0,
        Some(v) => v.as_u64().ok_or("\"next_step\" must be a non-negative integer")? as usize,
    };
    if next_step >= steps.len() {
        return Err(format!("\"next_step\" {next_step} is outside the {} steps", steps.len()));
    }
    Ok(Plan { steps, rationale, next_step })
}

fn parse_decision(text: &str) -> Result<AgentDecision, String> {
    let obj = object(text)?;
    let raw = obj.get("action").ok_or("missing \"action\"")?;
    let action: BrowserAction =
        serde_json::from_value(raw.clone()).map_err(|e| format!("\"action\" is not a valid action object: {e}"))?;
    let description = nonempty_str(&obj, "description")?;
    Ok(AgentDecision { action, description, failure: None })
}

/// Checks that an element-targeting action names an id from the list it
/// belongs to.
pub(crate) fn target_is_valid(action: &BrowserAction, obs: &ObservationPayload) -> bool {
    let Some(id) = action.target() else { return true };
    let has = |list: &[uxsim_web::ElementDescriptor]| list.iter().any(|e| e.semantic_id == id);
    match action {
        BrowserAction::TypeText { .. } | BrowserAction::ClearInput { .. } => has(&obs.input_elements),
        BrowserAction::SelectOption { .. } => has(&obs.select_elements),
        _ => obs.contains_id(id),
    }
}

fn tabs_text(obs: &ObservationPayload) -> String {
    if obs.tabs.is_empty() {
        return "(none)".into();
    }
    obs.tabs
        .iter()
        .map(|t| format!("[{}] {} - {}{}", t.index, t.title, t.url, if t.active { " (current)" } else { "" }))
        .collect::<Vec<_>>()
        .join("\n")
}

fn actions_text() -> String {
    ActionVariant::ALL.iter().map(|v| v.usage()).collect::<Vec<_>>().join("\n")
}

impl Agent {
    fn user_message(&self, text: String, obs: Option<&ObservationPayload>) -> ChatMessage {
        let msg = ChatMessage::user(text);
        match obs.and_then(|o| o.screenshot.clone()) {
            Some(png) if self.config.vision => msg.with_image(png),
            _ => msg,
        }
    }

    fn ensure_running(&self) -> Result<(), AgentError> {
        if self.state.lock().status != AgentStatus::Running {
            return Err(AgentError::NotRunning);
        }
        Ok(())
    }

    /// Turns an observation into observation memories in page order.
    pub async fn perceive(&self, obs: &ObservationPayload) -> Result<Vec<MemoryPiece>, AgentError> {
        let mut out = Vec::new();
        if let Some(err) = &obs.error {
            let text = format!("The last action did not work: {err}");
            let emb = self.embed(&text).await?;
            out.push(self.remember(NewMemory::new(SourceModule::Perception, text, emb).with_meta("error", true)).await?);
        }
        if obs.is_blank() {
            let emb = self.embed(EMPTY_PAGE).await?;
            out.push(self.remember(NewMemory::new(SourceModule::Perception, EMPTY_PAGE, emb)).await?);
            return Ok(out);
        }
        let intent = self.intent();
        let text = self.prompts.render(
            PromptKind::Perceive,
            &[("persona", &self.persona_text()), ("intent", &intent), ("page", &obs.html)],
        );
        let req = ChatRequest::new(vec![self.user_message(text, Some(obs))])
            .with_label("perceive")
            .with_schema(ResponseSchema::new("perception").field("observations", FieldKind::Array));
        self.capture.record(&req, self.stream.clock(), &[]);
        let parsed = self
            .gateway
            .complete_with(&req, |t| {
                let list = string_list(&object(t)?, "observations")?;
                if list.is_empty() {
                    return Err("\"observations\" must not be empty".into());
                }
                Ok(list)
            })
            .await?;
        for note in parsed.value {
            let emb = self.embed(&note).await?;
            out.push(self.remember(NewMemory::new(SourceModule::Perception, note, emb)).await?);
        }
        Ok(out)
    }

    async fn request_plan(&self, current: Option<&Plan>, memories: &[MemoryPiece], min_steps: usize) -> Result<Plan, AgentError> {
        let intent = self.intent();
        let plan_text = current.map(Plan::render).unwrap_or_else(|| "(no plan yet)".into());
        let text = self.prompts.render(
            PromptKind::Planning,
            &[
                ("persona", &self.persona_text()),
                ("intent", &intent),
                ("plan", &plan_text),
                ("memories", &render_memories(memories)),
            ],
        );
        let req = ChatRequest::new(vec![ChatMessage::user(text)]).with_label("planning").with_schema(
            ResponseSchema::new("plan").field("steps", FieldKind::Array).field("rationale", FieldKind::String),
        );
        self.capture.record(&req, self.stream.clock(), memories);
        let plan = self.gateway.complete_with(&req, |t| parse_plan(t, min_steps)).await?.value;
        let content = plan.render();
        let emb = self.embed(&content).await?;
        self.remember(NewMemory::new(SourceModule::Planning, content, emb)).await?;
        self.state.lock().current_plan = Some(plan.clone());
        Ok(plan)
    }

    /// First plan for the intent: at least two steps, starting at step 0.
    pub async fn plan_initial(&self) -> Result<Plan, AgentError> {
        self.ensure_running()?;
        let mut plan = self.request_plan(None, &[], 2).await?;
        if plan.next_step != 0 {
            plan.next_step = 0;
            self.state.lock().current_plan = Some(plan.clone());
        }
        Ok(plan)
    }

    /// Revises the plan in light of `memories`. Earlier plans stay in the
    /// stream.
    pub async fn plan_update(&self, memories: &[MemoryPiece]) -> Result<Plan, AgentError> {
        self.ensure_running()?;
        let current = self.state.lock().current_plan.clone();
        self.request_plan(current.as_ref(), memories, 1).await
    }

    fn action_request(&self, obs: &ObservationPayload, memories: &[MemoryPiece]) -> ChatRequest {
        let (intent, plan) = {
            let s = self.state.lock();
            (s.intent.clone(), s.current_plan.as_ref().map(Plan::render).unwrap_or_else(|| "(no plan)".into()))
        };
        let error = obs.error.as_ref().map(|e| format!("\nThe previous action failed: {e}\n")).unwrap_or_default();
        let text = self.prompts.render(
            PromptKind::Action,
            &[
                ("persona", &self.persona_text()),
                ("intent", &intent),
                ("plan", &plan),
                ("memories", &render_memories(memories)),
                ("page", &obs.html),
                ("tabs", &tabs_text(obs)),
                ("error", &error),
                ("actions", &actions_text()),
            ],
        );
        ChatRequest::new(vec![self.user_message(text, Some(obs))])
            .with_label("action")
            .with_schema(ResponseSchema::new("decision").field("action", FieldKind::Object).field("description", FieldKind::String))
    }

    /// Chooses the next action. An id missing from the observation earns one
    /// corrective re-prompt; a second miss becomes a failing terminate.
    /// Appends the action memory.
    pub async fn act(&self, obs: &ObservationPayload, memories: &[MemoryPiece]) -> Result<AgentDecision, AgentError> {
        self.ensure_running()?;
        let mut req = self.action_request(obs, memories);
        self.capture.record(&req, self.stream.clock(), memories);
        let first = self.gateway.complete_with(&req, parse_decision).await?;
        let mut decision = first.value;
        if !target_is_valid(&decision.action, obs) {
            let bad = decision.action.target().unwrap_or_default().to_string();
            warn!(target = %bad, "{}", AgentError::InvalidTarget(bad.clone()));
            req.messages.push(ChatMessage::assistant(first.text));
            req.messages.push(ChatMessage::user(format!(
                "There is no element with semantic id \"{bad}\" for that action on the current page. Choose again, using only ids from the page above."
            )));
            self.capture.record(&req, self.stream.clock(), memories);
            let second = self.gateway.complete_with(&req, parse_decision).await?.value;
            if target_is_valid(&second.action, obs) {
                decision = second;
            } else {
                let last = second.action.target().unwrap_or_default().to_string();
                decision = AgentDecision {
                    action: BrowserAction::Terminate { answer: None },
                    description: format!("Giving up: the element \"{last}\" I tried to use is not on the page."),
                    failure: Some(AgentError::InvalidTarget(last).to_string()),
                };
            }
        }
        let action_json = serde_json::to_value(&decision.action).expect("actions serialize");
        let emb = self.embed(&decision.description).await?;
        self.remember(NewMemory::new(SourceModule::Action, decision.description.clone(), emb).with_meta("action", action_json))
            .await?;
        Ok(decision)
    }

    async fn retrieve_slow(&self, text: &str) -> Result<Vec<MemoryPiece>, AgentError> {
        let q = self.query(text, &self.config.slow_weights, self.stream.clock()).await?;
        Ok(self.stream.retrieve(&q)?)
    }

    /// One insight over recent memories. Skipped on an empty stream; gateway
    /// failures are logged and skipped.
    pub async fn reflect(&self) -> Option<MemoryPiece> {
        if self.stream.is_empty() {
            return None;
        }
        match self.try_reflect().await {
            Ok(p) => Some(p),
            Err(e) => {
                warn!(error = %e, "reflection skipped");
                None
            }
        }
    }

    async fn try_reflect(&self) -> Result<MemoryPiece, AgentError> {
        let intent = self.intent();
        let memories = self.retrieve_slow(&intent).await?;
        let text = self.prompts.render(
            PromptKind::Reflect,
            &[("persona", &self.persona_text()), ("intent", &intent), ("memories", &render_memories(&memories))],
        );
        let req = ChatRequest::new(vec![ChatMessage::user(text)])
            .with_label("reflect")
            .with_schema(ResponseSchema::new("reflection").field("insight", FieldKind::String));
        let asked_at = self.stream.clock();
        self.capture.record(&req, asked_at, &memories);
        let insight = self.gateway.complete_with(&req, |t| nonempty_str(&object(t)?, "insight")).await?.value;
        let emb = self.embed(&insight).await?;
        self.remember(NewMemory::new(SourceModule::Reflection, insight, emb).with_meta("asked_at", asked_at)).await
    }

    /// One task-unrelated thought, flagged `wonder` in its metadata.
    pub async fn wonder(&self) -> Option<MemoryPiece> {
        match self.try_wonder().await {
            Ok(p) => Some(p),
            Err(e) => {
                warn!(error = %e, "wonder skipped");
                None
            }
        }
    }

    async fn try_wonder(&self) -> Result<MemoryPiece, AgentError> {
        let persona = self.persona_text();
        let memories = if self.stream.is_empty() { Vec::new() } else { self.retrieve_slow(&persona).await? };
        let text = self.prompts.render(PromptKind::Wonder, &[("persona", &persona), ("memories", &render_memories(&memories))]);
        let req = ChatRequest::new(vec![ChatMessage::user(text)])
            .with_label("wonder")
            .with_schema(ResponseSchema::new("wonder").field("thought", FieldKind::String));
        let asked_at = self.stream.clock();
        self.capture.record(&req, asked_at, &memories);
        let thought = self.gateway.complete_with(&req, |t| nonempty_str(&object(t)?, "thought")).await?.value;
        let emb = self.embed(&thought).await?;
        self.remember(
            NewMemory::new(SourceModule::Wonder, thought, emb).with_meta("wonder", true).with_meta("asked_at", asked_at),
        )
        .await
    }

    /// Scores every memory that has no importance yet. Values outside
    /// `[0, 1]` are clamped; ids the reply omits stay unscored for the next
    /// batch. Returns the assignments stored.
    pub async fn score_importance_batch(&self) -> Vec<(MemoryId, f64)> {
        let batch = self.stream.unscored();
        if batch.is_empty() {
            return Vec::new();
        }
        match self.try_score(&batch).await {
            Ok(v) => v,
            Err(e) => {
                warn!(error = %e, "importance scoring skipped");
                Vec::new()
            }
        }
    }

    async fn try_score(&self, batch: &[MemoryPiece]) -> Result<Vec<(MemoryId, f64)>, AgentError> {
        let lines: Vec<String> =
            batch.iter().map(|p| format!("[id {}] ({}) {}", p.id, p.kind, p.content.replace('\n', " / "))).collect();
        let text = self.prompts.render(
            PromptKind::MemoryImportance,
            &[("persona", &self.persona_text()), ("intent", &self.intent()), ("memories", &lines.join("\n"))],
        );
        let req = ChatRequest::new(vec![ChatMessage::user(text)])
            .with_label("memory_importance")
            .with_schema(ResponseSchema::new("importance").field("scores", FieldKind::Array));
        self.capture.record(&req, self.stream.clock(), batch);
        let scores = self
            .gateway
            .complete_with(&req, |t| {
                let obj = object(t)?;
                let items = obj.get("scores").and_then(Value::as_array).ok_or("\"scores\" must be an array")?;
                items
                    .iter()
                    .map(|s| {
                        let id = s.get("id").and_then(Value::as_u64).ok_or("each score needs an integer \"id\"")?;
                        let v = s.get("importance").and_then(Value::as_f64).ok_or("each score needs a numeric \"importance\"")?;
                        Ok((id, v))
                    })
                    .collect::<Result<Vec<_>, String>>()
            })
            .await?
            .value;
        let mut stored = Vec::new();
        for (id, raw) in scores {
            if !batch.iter().any(|p| p.id == id) {
                debug!(id, "importance for a memory outside the batch ignored");
                continue;
            }
            let v = if raw.is_finite() { raw.clamp(0.0, 1.0) } else { 0.0 };
            if v != raw {
                warn!(id, raw, clamped = v, "importance out of range, clamped");
            }
            match self.stream.set_importance(id, v) {
                Ok(_) => stored.push((id, v)),
                Err(e) => debug!(id, error = %e, "importance not stored"),
            }
        }
        Ok(stored)
    }
}
