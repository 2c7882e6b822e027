//! Observation building and action execution over a [`BrowserDriver`].

use serde::{Deserialize, Serialize};

use crate::action::BrowserAction;
use crate::dom::{parse_snapshot, ParsedPage};
use crate::driver::{BrowserDriver, DriverError};
use crate::observation::ObservationPayload;
use crate::quiescence::{wait_for_quiescence, QuiescencePolicy, QuiescenceReport};
use crate::snapshot::{NodeRef, Rect};

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum ActionError {
    #[error("no element with semantic id '{0}' exists on the current page")]
    UnknownTarget(String),
    #[error("element '{id}' cannot be interacted with: {reason}")]
    NotInteractable { id: String, reason: String },
    #[error("page did not settle within {ms} ms; observation taken anyway")]
    Timeout { ms: u64 },
    #[error("{action} failed: {reason}")]
    Failed { action: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ConnectorError {
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("the session has been terminated")]
    Terminated,
}

impl ConnectorError {
    pub fn is_browser_gone(&self) -> bool {
        matches!(self, ConnectorError::Driver(DriverError::BrowserGone(_)) | ConnectorError::Terminated)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectorConfig {
    pub quiescence: QuiescencePolicy,
    pub screenshots: bool,
}

/// What happened when an action ran.
#[derive(Debug, Clone)]
pub struct ExecutionOutcome {
    pub action: BrowserAction,
    /// Document-coordinate box of the target when the action started.
    pub target_box: Option<Rect>,
    pub error: Option<ActionError>,
    pub quiescence: Option<QuiescenceReport>,
    /// Fresh observation; empty after terminate.
    pub observation: ObservationPayload,
    pub terminated: bool,
}

pub struct WebConnector {
    driver: Box<dyn BrowserDriver>,
    config: ConnectorConfig,
    page: Option<ParsedPage>,
    last_error: Option<ActionError>,
    terminated: bool,
}

impl WebConnector {
    pub fn new(driver: Box<dyn BrowserDriver>, config: ConnectorConfig) -> Self {
        Self { driver, config, page: None, last_error: None, terminated: false }
    }

    pub fn config(&self) -> &ConnectorConfig {
        &self.config
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// The page parsed by the latest observation.
    pub fn page(&self) -> Option<&ParsedPage> {
        self.page.as_ref()
    }

    pub fn driver_mut(&mut self) -> &mut dyn BrowserDriver {
        self.driver.as_mut()
    }

    /// Navigates to the start URL and returns the first observation.
    pub async fn open(&mut self, url: &str) -> Result<ObservationPayload, ConnectorError> {
        self.ensure_live()?;
        self.driver.navigate(url).await?;
        let report = wait_for_quiescence(self.driver.as_mut(), &self.config.quiescence).await?;
        self.last_error = report.timed_out.then_some(ActionError::Timeout { ms: report.waited.as_millis() as u64 });
        self.observe().await
    }

    fn ensure_live(&self) -> Result<(), ConnectorError> {
        if self.terminated {
            Err(ConnectorError::Terminated)
        } else {
            Ok(())
        }
    }

    /// Builds the observation for the current page. Repeated calls on an
    /// unchanged page yield identical payloads.
    pub async fn observe(&mut self) -> Result<ObservationPayload, ConnectorError> {
        self.ensure_live()?;
        let snap = self.driver.snapshot().await?;
        let page = parse_snapshot(&snap);
        for w in &page.warnings {
            tracing::debug!(url = %page.url, warning = %w, "markup recovered");
        }
        self.driver.annotate(&page.annotations()).await?;
        let tabs = self.driver.tabs().await?;
        let screenshot = if self.config.screenshots { Some(self.driver.screenshot().await?) } else { None };
        let payload = ObservationPayload {
            html: page.html.clone(),
            clickable_elements: page.clickable(),
            input_elements: page.inputs(),
            hoverable_elements: page.hoverable(),
            select_elements: page.selects(),
            tabs,
            error: self.last_error.as_ref().map(ToString::to_string),
            screenshot,
        };
        self.page = Some(page);
        Ok(payload)
    }

    /// Runs one action, waits for quiescence and observes. Action-level
    /// failures are reported in the outcome and in the next observation's
    /// `error`; only a lost browser is an `Err`.
    pub async fn execute(&mut self, action: &BrowserAction) -> Result<ExecutionOutcome, ConnectorError> {
        self.ensure_live()?;
        if self.page.is_none() {
            self.observe().await?;
        }
        let mut target_box = None;
        let result = self.perform(action, &mut target_box).await;
        let mut error = match result {
            Ok(()) => None,
            Err(Step::Action(e)) => Some(e),
            Err(Step::Driver(e @ DriverError::BrowserGone(_))) => return Err(e.into()),
            Err(Step::Driver(e)) => Some(ActionError::Failed { action: action.name().into(), reason: e.to_string() }),
        };
        if action.is_terminate() && error.is_none() {
            self.driver.close().await?;
            self.terminated = true;
            self.last_error = None;
            return Ok(ExecutionOutcome {
                action: action.clone(),
                target_box,
                error: None,
                quiescence: None,
                observation: ObservationPayload::default(),
                terminated: true,
            });
        }
        let report = wait_for_quiescence(self.driver.as_mut(), &self.config.quiescence).await?;
        if report.timed_out && error.is_none() {
            error = Some(ActionError::Timeout { ms: report.waited.as_millis() as u64 });
        }
        if let Some(e) = &error {
            tracing::info!(action = action.name(), error = %e, "action failed");
        }
        self.last_error = error.clone();
        let observation = self.observe().await?;
        Ok(ExecutionOutcome { action: action.clone(), target_box, error, quiescence: Some(report), observation, terminated: false })
    }

    /// Validates a target id against the last observation and the live DOM,
    /// scrolls it into view and returns its node and viewport centre.
    async fn prepare(&mut self, id: &str, target_box: &mut Option<Rect>) -> Result<(NodeRef, f64, f64), Step> {
        let element = self
            .page
            .as_ref()
            .and_then(|p| p.find(id))
            .cloned()
            .ok_or_else(|| ActionError::UnknownTarget(id.to_string()))?;
        let node = self.driver.resolve(id).await?.ok_or_else(|| ActionError::UnknownTarget(id.to_string()))?;
        *target_box = element.bbox;
        let not_interactable = |reason: &str| ActionError::NotInteractable { id: id.to_string(), reason: reason.into() };
        if element.disabled {
            return Err(not_interactable("element is disabled").into());
        }
        let rect = self.driver.scroll_into_view(node).await?;
        if rect.is_empty() {
            return Err(not_interactable("element is not rendered").into());
        }
        let (x, y) = rect.center();
        let path = self.driver.hit_test(x, y).await?;
        if !path.contains(&node) {
            return Err(not_interactable("element is covered by another element").into());
        }
        Ok((node, x, y))
    }

    async fn perform(&mut self, action: &BrowserAction, target_box: &mut Option<Rect>) -> Result<(), Step> {
        use BrowserAction::*;
        match action {
            Click { target } => {
                let (_, x, y) = self.prepare(target, target_box).await?;
                self.driver.click_at(x, y).await?;
            }
            Hover { target } => {
                let (_, x, y) = self.prepare(target, target_box).await?;
                self.driver.hover_at(x, y).await?;
            }
            KeyPress { key, target } => {
                if let Some(t) = target {
                    let (node, _, _) = self.prepare(t, target_box).await?;
                    self.driver.focus(node).await?;
                }
                self.driver.press_key(key).await?;
            }
            TypeText { target, text, press_enter } => {
                self.require_input(target)?;
                let (node, x, y) = self.prepare(target, target_box).await?;
                self.driver.click_at(x, y).await?;
                self.driver.focus(node).await?;
                self.driver.insert_text(text).await?;
                if *press_enter {
                    self.driver.press_key("Enter").await?;
                }
            }
            ClearInput { target } => {
                self.require_input(target)?;
                let (node, _, _) = self.prepare(target, target_box).await?;
                self.driver.clear(node).await?;
            }
            SelectOption { target, option } => {
                let is_select = self.page.as_ref().and_then(|p| p.find(target)).map(|e| e.interactivity.select);
                if is_select == Some(false) {
                    return Err(ActionError::NotInteractable { id: target.clone(), reason: "element is not a dropdown".into() }.into());
                }
                let (node, _, _) = self.prepare(target, target_box).await?;
                self.driver.select_option(node, option).await?;
            }
            Navigate { url } => self.driver.navigate(url).await?,
            Back => self.driver.back().await?,
            Forward => self.driver.forward().await?,
            Refresh => self.driver.reload().await?,
            NewTab { url } => self.driver.new_tab(url.as_deref()).await?,
            SwitchTab { tab_index } => self.driver.switch_tab(*tab_index).await?,
            CloseTab { tab_index } => {
                let index = match tab_index {
                    Some(i) => *i,
                    None => self.driver.tabs().await?.iter().find(|t| t.active).map(|t| t.index).unwrap_or(0),
                };
                self.driver.close_tab(index).await?;
            }
            Terminate { .. } => {}
        }
        Ok(())
    }

    fn require_input(&self, id: &str) -> Result<(), Step> {
        match self.page.as_ref().and_then(|p| p.find(id)) {
            None => Err(ActionError::UnknownTarget(id.to_string()).into()),
            Some(e) if !e.interactivity.input => {
                Err(ActionError::NotInteractable { id: id.to_string(), reason: "element does not accept text".into() }.into())
            }
            Some(_) => Ok(()),
        }
    }

    /// Closes the browser without recording a terminate action.
    pub async fn shutdown(&mut self) -> Result<(), ConnectorError> {
        if !self.terminated {
            self.terminated = true;
            self.driver.close().await?;
        }
        Ok(())
    }
}

enum Step {
    Action(ActionError),
    Driver(DriverError),
}

impl From<ActionError> for Step {
    fn from(e: ActionError) -> Self {
        Step::Action(e)
    }
}

impl From<DriverError> for Step {
    fn from(e: DriverError) -> Self {
        Step::Driver(e)
    }
}
