//! Low-level browser control used by the connector.

use async_trait::async_trait;
use tokio::time::Instant;

use crate::dom::Annotation;
use crate::observation::TabInfo;
use crate::snapshot::{DomSnapshot, NodeRef, Rect};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DriverError {
    #[error("browser session is gone: {0}")]
    BrowserGone(String),
    #[error("node {0} no longer exists")]
    StaleNode(NodeRef),
    #[error("no option labelled {0:?}")]
    NoSuchOption(String),
    #[error("no tab at index {0}")]
    NoSuchTab(usize),
    #[error("{0}")]
    Refused(String),
    #[error("navigation failed: {0}")]
    Navigation(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Recent page activity, used to decide quiescence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activity {
    pub inflight: usize,
    pub last_network: Instant,
    pub last_mutation: Instant,
}

/// Primitive operations on one browser session. Coordinates passed to the
/// pointer methods are viewport coordinates.
#[async_trait]
pub trait BrowserDriver: Send {
    async fn snapshot(&mut self) -> Result<DomSnapshot, DriverError>;
    /// Writes semantic ids (and clickable markers) into the live document,
    /// replacing earlier annotations.
    async fn annotate(&mut self, annotations: &[Annotation]) -> Result<(), DriverError>;
    async fn resolve(&mut self, semantic_id: &str) -> Result<Option<NodeRef>, DriverError>;
    /// Scrolls until the node is visible and returns its viewport box.
    async fn scroll_into_view(&mut self, node: NodeRef) -> Result<Rect, DriverError>;
    /// Nodes under the point, innermost first.
    async fn hit_test(&mut self, x: f64, y: f64) -> Result<Vec<NodeRef>, DriverError>;
    async fn click_at(&mut self, x: f64, y: f64) -> Result<(), DriverError>;
    async fn hover_at(&mut self, x: f64, y: f64) -> Result<(), DriverError>;
    async fn focus(&mut self, node: NodeRef) -> Result<(), DriverError>;
    /// Inserts text at the focused control.
    async fn insert_text(&mut self, text: &str) -> Result<(), DriverError>;
    async fn press_key(&mut self, key: &str) -> Result<(), DriverError>;
    async fn clear(&mut self, node: NodeRef) -> Result<(), DriverError>;
    /// Chooses an option by label (or value) and fires change handling.
    async fn select_option(&mut self, node: NodeRef, option: &str) -> Result<(), DriverError>;
    async fn navigate(&mut self, url: &str) -> Result<(), DriverError>;
    async fn back(&mut self) -> Result<(), DriverError>;
    async fn forward(&mut self) -> Result<(), DriverError>;
    async fn reload(&mut self) -> Result<(), DriverError>;
    async fn tabs(&mut self) -> Result<Vec<TabInfo>, DriverError>;
    async fn new_tab(&mut self, url: Option<&str>) -> Result<(), DriverError>;
    async fn switch_tab(&mut self, index: usize) -> Result<(), DriverError>;
    async fn close_tab(&mut self, index: usize) -> Result<(), DriverError>;
    async fn activity(&mut self) -> Result<Activity, DriverError>;
    /// Full-page PNG.
    async fn screenshot(&mut self) -> Result<Vec<u8>, DriverError>;
    async fn close(&mut self) -> Result<(), DriverError>;
}

/// Opens fresh, isolated browser sessions.
#[async_trait]
pub trait BrowserFactory: Send + Sync {
    async fn launch(&self) -> Result<Box<dyn BrowserDriver>, DriverError>;
}
