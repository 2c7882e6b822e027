//! Visibility filtering, wrapper collapsing and empty-element pruning.

use crate::snapshot::{DomSnapshot, NodeKind, Rect, SnapshotNode};

use super::interact::{classify, Interactivity};

/// Tags whose subtree never carries visible content.
pub const DISCARDED_TAGS: &[&str] = &[
    "script", "style", "meta", "link", "head", "title", "noscript", "template", "base",
];

/// Elements that may be empty and still matter.
pub const EMPTY_OK_TAGS: &[&str] = &[
    "input", "img", "textarea", "select", "iframe", "video", "audio", "canvas", "svg", "progress",
    "meter", "hr", "br",
];

/// Generic containers eligible for collapsing.
pub const NON_SEMANTIC_TAGS: &[&str] = &["div", "span"];

#[derive(Debug, Clone, PartialEq)]
pub enum SimpleNode {
    Element(SimpleElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleElement {
    /// Index into `DomSnapshot::nodes`.
    pub index: usize,
    pub interactivity: Interactivity,
    pub children: Vec<SimpleNode>,
}

impl SimpleElement {
    /// Whitespace-normalized text of the subtree.
    pub fn text(&self) -> String {
        let mut parts = Vec::new();
        collect_text(&self.children, &mut parts);
        parts.join(" ")
    }
}

fn collect_text<'a>(nodes: &'a [SimpleNode], out: &mut Vec<&'a str>) {
    for n in nodes {
        match n {
            SimpleNode::Text(t) => out.push(t),
            SimpleNode::Element(e) => collect_text(&e.children, out),
        }
    }
}

pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) struct Simplifier<'a> {
    snap: &'a DomSnapshot,
    bounds: Rect,
}

impl<'a> Simplifier<'a> {
    pub fn new(snap: &'a DomSnapshot) -> Self {
        Self { snap, bounds: snap.document_bounds() }
    }

    /// Simplified children of the snapshot root.
    pub fn run(&self) -> Vec<SimpleNode> {
        let root = self.snap.node(self.snap.root);
        let mut out = Vec::new();
        for &c in &root.children {
            out.extend(self.visit(c, None, false));
        }
        out
    }

    fn visit(&self, index: usize, parent_cursor: Option<&str>, parent_hidden: bool) -> Vec<SimpleNode> {
        let node = self.snap.node(index);
        match node.kind {
            NodeKind::Text => {
                let t = normalize_ws(&node.text);
                if parent_hidden || t.is_empty() {
                    vec![]
                } else {
                    vec![SimpleNode::Text(t)]
                }
            }
            NodeKind::Document => node
                .children
                .iter()
                .flat_map(|&c| self.visit(c, parent_cursor, parent_hidden))
                .collect(),
            NodeKind::Element => self.visit_element(index, node, parent_cursor),
        }
    }

    fn discarded(&self, node: &SnapshotNode) -> bool {
        if DISCARDED_TAGS.contains(&node.tag.as_str()) || node.style.display == "none" {
            return true;
        }
        if node.tag == "input" && node.attr("type").is_some_and(|t| t.eq_ignore_ascii_case("hidden")) {
            return true;
        }
        match node.bbox {
            Some(b) if b.is_empty() => !self.has_rendered_descendant(node),
            Some(b) => b.entirely_outside(&self.bounds),
            None => false,
        }
    }

    /// A zero-size box can still host overflowing, rendered children.
    fn has_rendered_descendant(&self, node: &SnapshotNode) -> bool {
        node.children.iter().any(|&c| {
            let n = self.snap.node(c);
            n.is_element()
                && n.style.display != "none"
                && (n.bbox.is_some_and(|b| !b.is_empty()) || self.has_rendered_descendant(n))
        })
    }

    fn visit_element(&self, index: usize, node: &SnapshotNode, parent_cursor: Option<&str>) -> Vec<SimpleNode> {
        if self.discarded(node) {
            return vec![];
        }
        let hidden = node.style.visibility == "hidden" || node.style.visibility == "collapse";
        let mut children = Vec::new();
        for &c in &node.children {
            children.extend(self.visit(c, Some(node.style.cursor.as_str()), hidden));
        }
        if hidden {
            // The element itself is invisible; visible descendants survive.
            return children;
        }
        let interactivity = classify(node, parent_cursor);
        let interactive = interactivity.is_interactive();
        if children.is_empty() && !interactive && !EMPTY_OK_TAGS.contains(&node.tag.as_str()) {
            return vec![];
        }
        if !interactive
            && NON_SEMANTIC_TAGS.contains(&node.tag.as_str())
            && node.attr("role").is_none()
            && children.len() == 1
            && matches!(children[0], SimpleNode::Element(_))
        {
            return children;
        }
        vec![SimpleNode::Element(SimpleElement { index, interactivity, children })]
    }
}
