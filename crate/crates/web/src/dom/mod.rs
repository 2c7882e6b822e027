//! Snapshot → simplified markup and element sets.

pub mod ids;
pub mod interact;
pub mod simplify;

use serde::{Deserialize, Serialize};

use crate::observation::{ElementDescriptor, ElementStates};
use crate::snapshot::{DomSnapshot, NodeRef, Rect, SnapshotNode};

use ids::{slugify, IdAllocator};
pub use interact::{ClickRules, Interactivity};
use simplify::{normalize_ws, SimpleElement, SimpleNode, Simplifier};

/// Attributes carried over to the simplified markup.
const KEPT_ATTRS: &[&str] = &[
    "type", "placeholder", "value", "checked", "selected", "alt", "aria-label", "role", "href",
    "disabled", "title", "name",
];

/// Id to write back into the live document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub node_ref: NodeRef,
    pub semantic_id: String,
    pub clickable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageElement {
    pub node_ref: NodeRef,
    pub semantic_id: String,
    pub tag: String,
    pub visible_text: String,
    pub interactivity: Interactivity,
    pub states: ElementStates,
    pub bbox: Option<Rect>,
    pub disabled: bool,
}

impl PageElement {
    pub fn descriptor(&self) -> ElementDescriptor {
        ElementDescriptor {
            semantic_id: self.semantic_id.clone(),
            tag: self.tag.clone(),
            visible_text: self.visible_text.clone(),
            states: self.states.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedPage {
    pub url: String,
    pub title: String,
    pub html: String,
    /// Interactive elements in document order.
    pub elements: Vec<PageElement>,
    pub warnings: Vec<String>,
}

impl ParsedPage {
    pub fn find(&self, semantic_id: &str) -> Option<&PageElement> {
        self.elements.iter().find(|e| e.semantic_id == semantic_id)
    }

    fn select(&self, pred: impl Fn(&Interactivity) -> bool) -> Vec<ElementDescriptor> {
        self.elements
            .iter()
            .filter(|e| pred(&e.interactivity))
            .map(PageElement::descriptor)
            .collect()
    }

    pub fn clickable(&self) -> Vec<ElementDescriptor> {
        self.select(Interactivity::clickable)
    }

    pub fn hoverable(&self) -> Vec<ElementDescriptor> {
        self.select(|i| i.hoverable)
    }

    pub fn inputs(&self) -> Vec<ElementDescriptor> {
        self.select(|i| i.input)
    }

    pub fn selects(&self) -> Vec<ElementDescriptor> {
        self.select(|i| i.select)
    }

    pub fn annotations(&self) -> Vec<Annotation> {
        self.elements
            .iter()
            .map(|e| Annotation {
                node_ref: e.node_ref,
                semantic_id: e.semantic_id.clone(),
                clickable: e.interactivity.clickable(),
            })
            .collect()
    }
}

/// Runs simplification, interactable detection, id assignment and state
/// extraction over one snapshot.
pub fn parse_snapshot(snap: &DomSnapshot) -> ParsedPage {
    let tree = Simplifier::new(snap).run();
    let mut ctx = Builder { snap, ids: IdAllocator::new(), elements: Vec::new(), html: String::new() };
    ctx.assign(&tree);
    let mut cursor = 0;
    ctx.render(&tree, 0, &mut cursor);
    ParsedPage {
        url: snap.url.clone(),
        title: snap.title.clone(),
        html: ctx.html,
        elements: ctx.elements,
        warnings: snap.warnings.clone(),
    }
}

struct Builder<'a> {
    snap: &'a DomSnapshot,
    ids: IdAllocator,
    elements: Vec<PageElement>,
    html: String,
}

fn button_like_input(node: &SnapshotNode) -> bool {
    node.tag == "input"
        && matches!(interact::input_type(node).as_str(), "submit" | "button" | "reset")
}

/// Text a person would read on the element.
fn visible_text(node: &SnapshotNode, el: &SimpleElement) -> String {
    if button_like_input(node) {
        return normalize_ws(node.attr("value").unwrap_or_else(|| {
            if interact::input_type(node) == "reset" { "Reset" } else { "Submit" }
        }));
    }
    match node.tag.as_str() {
        // Option labels and typed values are states, not names.
        "select" | "input" | "textarea" => String::new(),
        _ => el.text(),
    }
}

fn slug_source(node: &SnapshotNode, text: &str) -> String {
    let candidates = [
        Some(text),
        node.attr("placeholder"),
        node.attr("aria-label"),
        node.attr("title"),
        node.attr("alt"),
        node.attr("name"),
    ];
    for c in candidates.into_iter().flatten() {
        let s = slugify(c);
        if !s.is_empty() {
            return s;
        }
    }
    let s = slugify(&node.tag);
    if s.is_empty() { "element".into() } else { s }
}

fn states(snap: &DomSnapshot, node: &SnapshotNode) -> ElementStates {
    let mut st = node.state.clone();
    match node.tag.as_str() {
        "input" | "textarea" => {
            let ty = interact::input_type(node);
            if matches!(ty.as_str(), "checkbox" | "radio") {
                st.value = None;
                st.checked.get_or_insert(node.attrs.contains_key("checked"));
            } else if st.value.is_none() && !button_like_input(node) {
                st.value = node.attr("value").map(str::to_string);
            }
        }
        "select" if st.selected.is_none() => st.selected = default_option(snap, node),
        _ => {}
    }
    st
}

fn option_label(snap: &DomSnapshot, opt: &SnapshotNode) -> String {
    let text: Vec<String> = opt.children.iter().map(|&c| normalize_ws(&snap.node(c).text)).collect();
    normalize_ws(&text.join(" "))
}

fn options<'s>(snap: &'s DomSnapshot, node: &'s SnapshotNode, out: &mut Vec<&'s SnapshotNode>) {
    for &c in &node.children {
        let n = snap.node(c);
        if n.tag == "option" {
            out.push(n);
        } else if n.tag == "optgroup" {
            options(snap, n, out);
        }
    }
}

fn default_option(snap: &DomSnapshot, select: &SnapshotNode) -> Option<String> {
    let mut opts = Vec::new();
    options(snap, select, &mut opts);
    let chosen = opts.iter().find(|o| o.attrs.contains_key("selected")).or(opts.first())?;
    Some(option_label(snap, chosen))
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

impl Builder<'_> {
    fn assign(&mut self, nodes: &[SimpleNode]) {
        for n in nodes {
            if let SimpleNode::Element(el) = n {
                let node = self.snap.node(el.index);
                if el.interactivity.is_interactive() {
                    let text = visible_text(node, el);
                    let base = slug_source(node, &text);
                    let semantic_id = self.ids.allocate(&base);
                    self.elements.push(PageElement {
                        node_ref: node.node_ref,
                        semantic_id,
                        tag: node.tag.clone(),
                        visible_text: text,
                        interactivity: el.interactivity,
                        states: states(self.snap, node),
                        bbox: node.bbox,
                        disabled: node.attrs.contains_key("disabled"),
                    });
                }
                self.assign(&el.children);
            }
        }
    }

    /// Elements are visited in the same order as `assign`, so `cursor`
    /// walks `self.elements` in lockstep.
    fn render(&mut self, nodes: &[SimpleNode], depth: usize, cursor: &mut usize) {
        let pad = "  ".repeat(depth);
        for n in nodes {
            match n {
                SimpleNode::Text(t) => {
                    self.html.push_str(&pad);
                    self.html.push_str(&escape_text(t));
                    self.html.push('\n');
                }
                SimpleNode::Element(el) => {
                    let node = self.snap.node(el.index);
                    let mut open = format!("<{}", node.tag);
                    if el.interactivity.is_interactive() {
                        let pe = &self.elements[*cursor];
                        *cursor += 1;
                        open.push_str(&format!(" semantic-id=\"{}\"", pe.semantic_id));
                        if el.interactivity.clickable() {
                            open.push_str(" clickable=\"true\"");
                        }
                    }
                    for (k, v) in &node.attrs {
                        if KEPT_ATTRS.contains(&k.as_str()) {
                            if v.is_empty() {
                                open.push_str(&format!(" {k}"));
                            } else {
                                open.push_str(&format!(" {k}=\"{}\"", escape_attr(v)));
                            }
                        }
                    }
                    open.push('>');
                    let inline = el.children.iter().all(|c| matches!(c, SimpleNode::Text(_)));
                    self.html.push_str(&pad);
                    self.html.push_str(&open);
                    if inline {
                        let text: Vec<&str> = el
                            .children
                            .iter()
                            .filter_map(|c| match c {
                                SimpleNode::Text(t) => Some(t.as_str()),
                                _ => None,
                            })
                            .collect();
                        self.html.push_str(&escape_text(&text.join(" ")));
                    } else {
                        self.html.push('\n');
                        self.render(&el.children, depth + 1, cursor);
                        self.html.push_str(&pad);
                    }
                    if !matches!(node.tag.as_str(), "input" | "img" | "hr" | "br") {
                        self.html.push_str(&format!("</{}>", node.tag));
                    }
                    self.html.push('\n');
                }
            }
        }
    }
}
