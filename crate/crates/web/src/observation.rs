use serde::{Deserialize, Serialize};

use crate::snapshot::NodeState;

/// Recorded JavaScript state of one element (value, checkedness, selected
/// option label, focus).
pub type ElementStates = NodeState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDescriptor {
    pub semantic_id: String,
    pub tag: String,
    pub visible_text: String,
    #[serde(default)]
    pub states: ElementStates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabInfo {
    pub index: usize,
    pub title: String,
    pub url: String,
    pub active: bool,
}

/// Human-aligned view of the current page.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationPayload {
    pub html: String,
    pub clickable_elements: Vec<ElementDescriptor>,
    pub input_elements: Vec<ElementDescriptor>,
    pub hoverable_elements: Vec<ElementDescriptor>,
    pub select_elements: Vec<ElementDescriptor>,
    pub tabs: Vec<TabInfo>,
    pub error: Option<String>,
    /// Full-page PNG, only when screenshots are enabled.
    #[serde(skip)]
    pub screenshot: Option<Vec<u8>>,
}

impl ObservationPayload {
    pub fn all_elements(&self) -> impl Iterator<Item = &ElementDescriptor> {
        self.clickable_elements
            .iter()
            .chain(&self.input_elements)
            .chain(&self.hoverable_elements)
            .chain(&self.select_elements)
    }

    pub fn find(&self, semantic_id: &str) -> Option<&ElementDescriptor> {
        self.all_elements().find(|e| e.semantic_id == semantic_id)
    }

    pub fn contains_id(&self, semantic_id: &str) -> bool {
        self.find(semantic_id).is_some()
    }

    /// True when the simplified page carries no visible content.
    pub fn is_blank(&self) -> bool {
        let mut in_tag = false;
        for c in self.html.chars() {
            match c {
                '<' => in_tag = true,
                '>' => in_tag = false,
                c if !in_tag && !c.is_whitespace() => return false,
                _ => {}
            }
        }
        self.all_elements().next().is_none()
    }

    pub fn active_tab(&self) -> Option<&TabInfo> {
        self.tabs.iter().find(|t| t.active)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("observation serializes")
    }
}
