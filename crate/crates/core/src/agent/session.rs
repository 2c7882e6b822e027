use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use tracing::{info, warn};
use uxsim_web::{BrowserAction, ObservationPayload, Rect, WebConnector};

use super::{Agent, AgentDecision, AgentError, AgentStatus, Plan, SlowLoopConfig};

/// One line of the action trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub description: String,
}

impl From<&AgentDecision> for TraceRecord {
    fn from(d: &AgentDecision) -> Self {
        Self { action: d.action.name().to_string(), target: d.action.target().map(str::to_string), description: d.description.clone() }
    }
}

/// Everything known about one executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub timestamp: u64,
    pub action: BrowserAction,
    pub description: String,
    /// URL of the page the decision was made on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_box: Option<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// PNG of the page the decision was made on.
    #[serde(skip)]
    pub screenshot: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub status: AgentStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination_reason: Option<String>,
    pub trace: Vec<TraceRecord>,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_plan: Option<Plan>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Progress {
    clock: u64,
    done: bool,
}

impl Agent {
    /// Runs the fast loop to completion with the slow loop alongside it.
    /// `start_url`, when given, is opened first; otherwise the connector's
    /// current page is used.
    pub async fn run_session(&self, connector: &mut WebConnector, start_url: Option<&str>) -> SessionOutcome {
        let (tx, rx) = watch::channel(Progress { clock: self.stream.clock(), done: false });
        let fast = async {
            let out = self.fast_loop(connector, start_url, &tx).await;
            tx.send_modify(|p| p.done = true);
            out
        };
        match self.config.slow_loop.clone() {
            Some(cfg) => tokio::join!(fast, self.slow_loop(cfg, rx)).0,
            None => fast.await,
        }
    }

    fn fail(&self, reason: String) {
        warn!(%reason, "session failed");
        self.state.lock().finish(AgentStatus::Failed, Some(reason));
    }

    async fn fast_loop(
        &self,
        connector: &mut WebConnector,
        start_url: Option<&str>,
        tx: &watch::Sender<Progress>,
    ) -> SessionOutcome {
        let mut trace = Vec::new();
        let mut steps = Vec::new();
        let advance = || {
            let t = self.tick();
            tx.send_modify(|p| p.clock = t);
            t
        };
        advance();
        let opened = match self.plan_initial().await {
            Err(e) => Err(format!("initial planning failed: {e}")),
            Ok(_) => match start_url {
                Some(url) => connector.open(url).await,
                None => connector.observe().await,
            }
            .map_err(|e| format!("browser: {e}")),
        };
        match opened {
            Err(reason) => self.fail(reason),
            Ok(first) => self.steps(connector, first, &advance, &mut trace, &mut steps).await,
        }
        if let Err(e) = connector.shutdown().await {
            warn!(error = %e, "browser shutdown failed");
        }
        let state = self.state.lock().clone();
        SessionOutcome {
            status: state.status,
            termination_reason: state.termination_reason,
            trace,
            steps,
            final_plan: state.current_plan,
        }
    }

    async fn steps(
        &self,
        connector: &mut WebConnector,
        mut obs: ObservationPayload,
        advance: &impl Fn() -> u64,
        trace: &mut Vec<TraceRecord>,
        steps: &mut Vec<StepRecord>,
    ) {
        let budget = self.config.step_budget;
        for index in 0..budget {
            let t = advance();
            let decision = match self.decide(&obs).await {
                Ok(d) => d,
                Err(e) => return self.fail(e.to_string()),
            };
            trace.push(TraceRecord::from(&decision));
            let mut step = StepRecord {
                index,
                timestamp: t,
                action: decision.action.clone(),
                description: decision.description.clone(),
                url: obs.active_tab().map(|tab| tab.url.clone()),
                target_box: None,
                error: None,
                screenshot: obs.screenshot.take(),
            };
            match connector.execute(&decision.action).await {
                Ok(out) => {
                    step.target_box = out.target_box;
                    step.error = out.error.map(|e| e.to_string());
                    steps.push(step);
                    if out.terminated {
                        let mut s = self.state.lock();
                        match decision.failure {
                            Some(reason) => s.finish(AgentStatus::Failed, Some(reason)),
                            None => {
                                let reason = match &decision.action {
                                    BrowserAction::Terminate { answer: Some(a) } => a.clone(),
                                    _ => decision.description.clone(),
                                };
                                s.finish(AgentStatus::Terminated, Some(reason))
                            }
                        };
                        info!(steps = index + 1, status = ?s.status, "session ended");
                        return;
                    }
                    obs = out.observation;
                }
                Err(e) => {
                    step.error = Some(e.to_string());
                    steps.push(step);
                    return self.fail(AgentError::Connector(e.to_string()).to_string());
                }
            }
        }
        self.fail(AgentError::StepBudgetExceeded(budget).to_string());
    }

    /// perceive, retrieve, update the plan, retrieve again and act.
    async fn decide(&self, obs: &ObservationPayload) -> Result<AgentDecision, AgentError> {
        self.perceive(obs).await?;
        let memories = self.retrieve_fast().await?;
        self.plan_update(&memories).await?;
        let memories = self.retrieve_fast().await?;
        self.act(obs, &memories).await
    }

    async fn slow_loop(&self, cfg: SlowLoopConfig, mut rx: watch::Receiver<Progress>) {
        let every = cfg.every_steps.max(1);
        let mut next = rx.borrow().clock + every;
        loop {
            let Ok(p) = rx.wait_for(|p| p.done || p.clock >= next).await.map(|p| *p) else { return };
            if p.done {
                return;
            }
            let mut stop = rx.clone();
            tokio::select! {
                _ = self.slow_pass(&cfg) => {}
                _ = stop.wait_for(|p| p.done) => return,
            }
            next = p.clock + every;
        }
    }

    /// reflect, wonder, then score whatever is still unscored.
    pub async fn slow_pass(&self, cfg: &SlowLoopConfig) {
        let _gate = self.slow_gate.lock().await;
        if cfg.reflect {
            self.reflect().await;
        }
        if cfg.wonder {
            self.wonder().await;
        }
        if cfg.importance {
            self.score_importance_batch().await;
        }
    }
}
