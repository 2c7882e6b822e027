//! Raw DOM snapshot exchanged between a browser driver and the DOM parser.
//!
//! The shape is produced natively by the headless engine and, for real
//! browsers, by `assets/instrument.js` evaluated in the page.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Opaque handle to a live DOM node, valid for the document it came from.
pub type NodeRef = u64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn is_empty(&self) -> bool {
        self.width <= 0.0 || self.height <= 0.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// True when no part of `self` overlaps `bounds`.
    pub fn entirely_outside(&self, bounds: &Rect) -> bool {
        self.right() <= bounds.x
            || self.bottom() <= bounds.y
            || self.x >= bounds.right()
            || self.y >= bounds.bottom()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Size {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedStyle {
    pub display: String,
    pub visibility: String,
    pub cursor: String,
}

impl Default for ComputedStyle {
    fn default() -> Self {
        Self { display: "inline".into(), visibility: "visible".into(), cursor: "auto".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ListenerFlags {
    /// `onclick` set as attribute or property.
    #[serde(default)]
    pub click: bool,
    /// A hover-type listener was registered.
    #[serde(default)]
    pub hover: bool,
}

/// JavaScript-side state not visible in markup.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<String>,
    #[serde(default)]
    pub focused: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Document,
    Element,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNode {
    #[serde(rename = "ref")]
    pub node_ref: NodeRef,
    #[serde(rename = "type")]
    pub kind: NodeKind,
    #[serde(default)]
    pub tag: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub children: Vec<usize>,
    #[serde(default)]
    pub style: ComputedStyle,
    /// Border box in document coordinates; `None` when not rendered.
    #[serde(default, rename = "box")]
    pub bbox: Option<Rect>,
    /// Some stylesheet rule reacts to hovering this element.
    #[serde(default, rename = "hoverStyled")]
    pub hover_styled: bool,
    #[serde(default)]
    pub listeners: ListenerFlags,
    #[serde(default)]
    pub state: NodeState,
}

impl SnapshotNode {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    pub fn is_element(&self) -> bool {
        self.kind == NodeKind::Element
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomSnapshot {
    pub url: String,
    #[serde(default)]
    pub title: String,
    pub viewport: Size,
    /// Layout bounds of the whole document.
    pub document: Size,
    #[serde(default)]
    pub scroll: Size,
    pub nodes: Vec<SnapshotNode>,
    pub root: usize,
    /// Parser diagnostics for malformed markup.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DomSnapshot {
    pub fn node(&self, i: usize) -> &SnapshotNode {
        &self.nodes[i]
    }

    pub fn document_bounds(&self) -> Rect {
        Rect::new(0.0, 0.0, self.document.width, self.document.height)
    }
}
