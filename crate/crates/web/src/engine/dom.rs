//! Mutable document arena backing the headless engine.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ego_tree::NodeRef as TreeRef;
use scraper::{Html, Node as HtmlNode};

use crate::snapshot::{ListenerFlags, NodeRef};

static NEXT_REF: AtomicU64 = AtomicU64::new(1);

fn next_ref() -> NodeRef {
    NEXT_REF.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct ElementData {
    pub tag: String,
    pub attrs: BTreeMap<String, String>,
    pub listeners: ListenerFlags,
    /// Current value of text controls.
    pub value: Option<String>,
    pub checked: bool,
    /// Arena index of the chosen `<option>` of a select.
    pub selected_option: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum NodeData {
    Document,
    Element(ElementData),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeRef,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub data: NodeData,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub url: String,
    pub nodes: Vec<Node>,
    pub warnings: Vec<String>,
}

impl Document {
    pub fn blank(url: &str) -> Self {
        Self::parse("", url)
    }

    /// Parses markup leniently. Recoverable syntax problems are kept as
    /// warnings rather than failing the load.
    pub fn parse(markup: &str, url: &str) -> Self {
        let html = Html::parse_document(markup);
        let mut doc = Document {
            url: url.to_string(),
            nodes: vec![Node { id: next_ref(), parent: None, children: vec![], data: NodeData::Document }],
            warnings: html.errors.iter().map(|e| e.to_string()).collect(),
        };
        for child in html.tree.root().children() {
            doc.import(child, 0);
        }
        doc.init_controls();
        doc
    }

    fn import(&mut self, src: TreeRef<'_, HtmlNode>, parent: usize) {
        let data = match src.value() {
            HtmlNode::Element(e) => NodeData::Element(ElementData {
                tag: e.name().to_ascii_lowercase(),
                attrs: e.attrs().map(|(k, v)| (k.to_ascii_lowercase(), v.to_string())).collect(),
                listeners: ListenerFlags::default(),
                value: None,
                checked: false,
                selected_option: None,
            }),
            HtmlNode::Text(t) => NodeData::Text(t.to_string()),
            _ => return,
        };
        let idx = self.push(parent, data);
        for child in src.children() {
            self.import(child, idx);
        }
    }

    pub fn push(&mut self, parent: usize, data: NodeData) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node { id: next_ref(), parent: Some(parent), children: vec![], data });
        self.nodes[parent].children.push(idx);
        idx
    }

    fn init_controls(&mut self) {
        for i in 0..self.nodes.len() {
            let Some(tag) = self.tag(i).map(str::to_string) else { continue };
            match tag.as_str() {
                "input" => {
                    let value = self.attr(i, "value").map(str::to_string);
                    let checked = self.has_attr(i, "checked");
                    let el = self.element_mut(i).unwrap();
                    el.value = value;
                    el.checked = checked;
                }
                "textarea" => {
                    let text = self.text_content(i);
                    self.element_mut(i).unwrap().value = Some(text);
                }
                "select" => {
                    let opts = self.options(i);
                    let chosen = opts.iter().copied().find(|&o| self.has_attr(o, "selected")).or(opts.first().copied());
                    self.element_mut(i).unwrap().selected_option = chosen;
                }
                _ => {}
            }
        }
    }

    pub fn element(&self, i: usize) -> Option<&ElementData> {
        match &self.nodes.get(i)?.data {
            NodeData::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn element_mut(&mut self, i: usize) -> Option<&mut ElementData> {
        match &mut self.nodes.get_mut(i)?.data {
            NodeData::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn tag(&self, i: usize) -> Option<&str> {
        self.element(i).map(|e| e.tag.as_str())
    }

    pub fn attr(&self, i: usize, name: &str) -> Option<&str> {
        self.element(i)?.attrs.get(name).map(String::as_str)
    }

    pub fn has_attr(&self, i: usize, name: &str) -> bool {
        self.attr(i, name).is_some()
    }

    pub fn set_attr(&mut self, i: usize, name: &str, value: &str) {
        if let Some(e) = self.element_mut(i) {
            e.attrs.insert(name.to_string(), value.to_string());
        }
    }

    pub fn remove_attr(&mut self, i: usize, name: &str) {
        if let Some(e) = self.element_mut(i) {
            e.attrs.remove(name);
        }
    }

    pub fn index_of(&self, node: NodeRef) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == node)
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.element(i).is_some())
    }

    pub fn by_id(&self, id: &str) -> Option<usize> {
        self.elements().find(|&i| self.attr(i, "id") == Some(id))
    }

    pub fn by_attr(&self, name: &str, value: &str) -> Option<usize> {
        self.elements().find(|&i| self.attr(i, name) == Some(value))
    }

    pub fn first_tag(&self, tag: &str) -> Option<usize> {
        self.elements().find(|&i| self.tag(i) == Some(tag))
    }

    /// Parent chain, nearest first, excluding `i`.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[i].parent, move |&p| self.nodes[p].parent)
    }

    pub fn is_inclusive_ancestor(&self, ancestor: usize, i: usize) -> bool {
        ancestor == i || self.ancestors(i).any(|a| a == ancestor)
    }

    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.nodes[i].children.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev().copied());
        }
        out
    }

    pub fn text_content(&self, i: usize) -> String {
        let mut s = String::new();
        if let NodeData::Text(t) = &self.nodes[i].data {
            return t.clone();
        }
        for d in self.descendants(i) {
            if let NodeData::Text(t) = &self.nodes[d].data {
                s.push_str(t);
            }
        }
        s
    }

    pub fn title(&self) -> String {
        self.first_tag("title")
            .map(|t| self.text_content(t).split_whitespace().collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    }

    pub fn options(&self, select: usize) -> Vec<usize> {
        self.descendants(select).into_iter().filter(|&d| self.tag(d) == Some("option")).collect()
    }

    pub fn option_label(&self, opt: usize) -> String {
        self.text_content(opt).split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub fn option_value(&self, opt: usize) -> String {
        self.attr(opt, "value").map(str::to_string).unwrap_or_else(|| self.option_label(opt))
    }

    /// The form a control submits with.
    pub fn form_of(&self, i: usize) -> Option<usize> {
        if let Some(id) = self.attr(i, "form") {
            return self.by_id(id).filter(|&f| self.tag(f) == Some("form"));
        }
        self.ancestors(i).find(|&a| self.tag(a) == Some("form"))
    }

    pub fn input_type(&self, i: usize) -> String {
        self.attr(i, "type").unwrap_or("").trim().to_ascii_lowercase()
    }

    pub fn is_text_control(&self, i: usize) -> bool {
        match self.tag(i) {
            Some("textarea") => true,
            Some("input") => matches!(
                self.input_type(i).as_str(),
                "" | "text" | "search" | "email" | "password" | "number" | "tel" | "url"
            ),
            Some(_) => matches!(self.attr(i, "contenteditable"), Some("") | Some("true")),
            None => false,
        }
    }

    pub fn is_focusable(&self, i: usize) -> bool {
        match self.tag(i) {
            Some("a") => self.has_attr(i, "href"),
            Some("button" | "select" | "textarea" | "summary") => true,
            Some("input") => self.input_type(i) != "hidden",
            Some(_) => self.has_attr(i, "tabindex") || self.is_text_control(i),
            None => false,
        }
    }

    pub fn is_disabled(&self, i: usize) -> bool {
        self.has_attr(i, "disabled")
            || self.ancestors(i).any(|a| self.tag(a) == Some("fieldset") && self.has_attr(a, "disabled"))
    }

    /// Successful controls of a form as name/value pairs, in tree order.
    pub fn form_data(&self, form: usize, submitter: Option<usize>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let members = self.elements().filter(|&i| i != form && self.form_of(i) == Some(form));
        for i in members {
            let Some(name) = self.attr(i, "name").filter(|n| !n.is_empty()) else { continue };
            if self.is_disabled(i) {
                continue;
            }
            let el = self.element(i).unwrap();
            match el.tag.as_str() {
                "input" => match self.input_type(i).as_str() {
                    "checkbox" | "radio" => {
                        if el.checked {
                            out.push((name.into(), self.attr(i, "value").unwrap_or("on").into()));
                        }
                    }
                    "submit" | "button" | "reset" | "image" => {
                        if submitter == Some(i) {
                            out.push((name.into(), self.attr(i, "value").unwrap_or("").into()));
                        }
                    }
                    _ => out.push((name.into(), el.value.clone().unwrap_or_default())),
                },
                "textarea" => out.push((name.into(), el.value.clone().unwrap_or_default())),
                "select" => {
                    if let Some(o) = el.selected_option {
                        out.push((name.into(), self.option_value(o)));
                    }
                }
                "button" if submitter == Some(i) => {
                    out.push((name.into(), self.attr(i, "value").unwrap_or("").into()));
                }
                _ => {}
            }
        }
        out
    }
}
