//! Interactivity classification.

use serde::{Deserialize, Serialize};

use crate::snapshot::SnapshotNode;

const CLICK_ROLES: &[&str] = &[
    "button",
    "link",
    "checkbox",
    "radio",
    "menuitem",
    "menuitemcheckbox",
    "menuitemradio",
    "tab",
    "option",
    "switch",
    "combobox",
    "treeitem",
];

const TEXT_INPUT_TYPES: &[&str] = &[
    "", "text", "search", "email", "password", "number", "tel", "url", "date", "datetime-local",
    "month", "week", "time",
];

/// Which clickability rules fired for an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClickRules {
    pub native_control: bool,
    pub anchor_href: bool,
    pub onclick: bool,
    pub aria_role: bool,
    pub cursor_pointer: bool,
}

impl ClickRules {
    pub fn any(&self) -> bool {
        self.native_control || self.anchor_href || self.onclick || self.aria_role || self.cursor_pointer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Interactivity {
    pub click_rules: ClickRules,
    pub hoverable: bool,
    pub input: bool,
    pub select: bool,
}

impl Interactivity {
    pub fn clickable(&self) -> bool {
        self.click_rules.any()
    }

    pub fn is_interactive(&self) -> bool {
        self.clickable() || self.hoverable || self.input || self.select
    }
}

pub fn input_type(node: &SnapshotNode) -> String {
    node.attr("type").unwrap_or("").trim().to_ascii_lowercase()
}

fn is_native_control(node: &SnapshotNode) -> bool {
    match node.tag.as_str() {
        "button" | "select" | "textarea" | "summary" => true,
        "input" => input_type(node) != "hidden",
        _ => false,
    }
}

pub fn is_text_input(node: &SnapshotNode) -> bool {
    match node.tag.as_str() {
        "input" => TEXT_INPUT_TYPES.contains(&input_type(node).as_str()),
        "textarea" => true,
        _ => matches!(node.attr("contenteditable"), Some("") | Some("true")),
    }
}

/// Classifies one element. `parent_cursor` is the computed cursor of the
/// parent element: the pointer rule fires only where the pointer cursor is
/// introduced, not where it is merely inherited.
pub fn classify(node: &SnapshotNode, parent_cursor: Option<&str>) -> Interactivity {
    if !node.is_element() {
        return Interactivity::default();
    }
    let role = node.attr("role").map(|r| r.trim().to_ascii_lowercase());
    let click_rules = ClickRules {
        native_control: is_native_control(node),
        anchor_href: node.tag == "a" && node.attrs.contains_key("href"),
        onclick: node.attrs.contains_key("onclick") || node.listeners.click,
        aria_role: role.as_deref().is_some_and(|r| CLICK_ROLES.contains(&r)),
        cursor_pointer: node.style.cursor == "pointer" && parent_cursor != Some("pointer"),
    };
    Interactivity {
        click_rules,
        hoverable: node.attr("maybe-hoverable") == Some("true")
            || node.listeners.hover
            || node.hover_styled,
        input: is_text_input(node),
        select: node.tag == "select",
    }
}
