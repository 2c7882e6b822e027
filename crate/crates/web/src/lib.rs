//! Browser connector: turns a live page into a compact observation with
//! stable semantic element ids, and executes the fixed action space
//! against it.

pub mod action;
pub mod cdp;
pub mod connector;
pub mod corpus;
pub mod dom;
pub mod driver;
pub mod engine;
pub mod observation;
pub mod quiescence;
pub mod snapshot;

pub use action::{ActionVariant, BrowserAction};
pub use connector::{ActionError, ConnectorConfig, ConnectorError, ExecutionOutcome, WebConnector};
pub use dom::{parse_snapshot, Annotation, PageElement, ParsedPage};
pub use driver::{Activity, BrowserDriver, BrowserFactory, DriverError};
pub use engine::{HeadlessBrowser, HeadlessConfig, HeadlessFactory};
pub use observation::{ElementDescriptor, ElementStates, ObservationPayload, TabInfo};
pub use quiescence::{wait_for_quiescence, QuiescencePolicy, QuiescenceReport};
pub use snapshot::{DomSnapshot, NodeRef, Rect};
