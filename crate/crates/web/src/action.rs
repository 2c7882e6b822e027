use serde::{Deserialize, Serialize};

/// The fourteen primitive interactions. Element-level variants carry the
/// semantic id of their target. There is deliberately no scroll variant:
/// targets are scrolled into view automatically before execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum BrowserAction {
    Click {
        target: String,
    },
    Hover {
        target: String,
    },
    KeyPress {
        key: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
    TypeText {
        target: String,
        text: String,
        #[serde(default)]
        press_enter: bool,
    },
    ClearInput {
        target: String,
    },
    SelectOption {
        target: String,
        option: String,
    },
    Navigate {
        url: String,
    },
    Back,
    Forward,
    Refresh,
    NewTab {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        url: Option<String>,
    },
    SwitchTab {
        tab_index: usize,
    },
    CloseTab {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tab_index: Option<usize>,
    },
    Terminate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        answer: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVariant {
    Click,
    Hover,
    KeyPress,
    TypeText,
    ClearInput,
    SelectOption,
    Navigate,
    Back,
    Forward,
    Refresh,
    NewTab,
    SwitchTab,
    CloseTab,
    Terminate,
}

impl ActionVariant {
    pub const ALL: [ActionVariant; 14] = [
        ActionVariant::Click,
        ActionVariant::Hover,
        ActionVariant::KeyPress,
        ActionVariant::TypeText,
        ActionVariant::ClearInput,
        ActionVariant::SelectOption,
        ActionVariant::Navigate,
        ActionVariant::Back,
        ActionVariant::Forward,
        ActionVariant::Refresh,
        ActionVariant::NewTab,
        ActionVariant::SwitchTab,
        ActionVariant::CloseTab,
        ActionVariant::Terminate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionVariant::Click => "click",
            ActionVariant::Hover => "hover",
            ActionVariant::KeyPress => "key_press",
            ActionVariant::TypeText => "type_text",
            ActionVariant::ClearInput => "clear_input",
            ActionVariant::SelectOption => "select_option",
            ActionVariant::Navigate => "navigate",
            ActionVariant::Back => "back",
            ActionVariant::Forward => "forward",
            ActionVariant::Refresh => "refresh",
            ActionVariant::NewTab => "new_tab",
            ActionVariant::SwitchTab => "switch_tab",
            ActionVariant::CloseTab => "close_tab",
            ActionVariant::Terminate => "terminate",
        }
    }

    /// Whether the variant must reference an element.
    pub fn requires_target(self) -> bool {
        matches!(
            self,
            ActionVariant::Click
                | ActionVariant::Hover
                | ActionVariant::TypeText
                | ActionVariant::ClearInput
                | ActionVariant::SelectOption
        )
    }

    /// One line per variant, for prompts.
    pub fn usage(self) -> &'static str {
        match self {
            ActionVariant::Click => r#"{"action": "click", "target": "<semantic id>"} - click a button, link or control"#,
            ActionVariant::Hover => r#"{"action": "hover", "target": "<semantic id>"} - move the pointer over an element"#,
            ActionVariant::KeyPress => r#"{"action": "key_press", "key": "Enter|Escape|Tab|ArrowDown|...", "target": "<optional semantic id>"} - press a key"#,
            ActionVariant::TypeText => r#"{"action": "type_text", "target": "<semantic id>", "text": "...", "press_enter": true|false} - type into an input"#,
            ActionVariant::ClearInput => r#"{"action": "clear_input", "target": "<semantic id>"} - remove all text from an input"#,
            ActionVariant::SelectOption => r#"{"action": "select_option", "target": "<semantic id>", "option": "<option label>"} - choose a dropdown option"#,
            ActionVariant::Navigate => r#"{"action": "navigate", "url": "..."} - load a URL in the current tab"#,
            ActionVariant::Back => r#"{"action": "back"} - go back in history"#,
            ActionVariant::Forward => r#"{"action": "forward"} - go forward in history"#,
            ActionVariant::Refresh => r#"{"action": "refresh"} - reload the page"#,
            ActionVariant::NewTab => r#"{"action": "new_tab", "url": "<optional url>"} - open a new tab"#,
            ActionVariant::SwitchTab => r#"{"action": "switch_tab", "tab_index": 0} - focus another tab"#,
            ActionVariant::CloseTab => r#"{"action": "close_tab", "tab_index": 0} - close a tab (defaults to the current one)"#,
            ActionVariant::Terminate => r#"{"action": "terminate", "answer": "<optional final answer>"} - end the session"#,
        }
    }
}

impl BrowserAction {
    pub fn variant(&self) -> ActionVariant {
        match self {
            BrowserAction::Click { .. } => ActionVariant::Click,
            BrowserAction::Hover { .. } => ActionVariant::Hover,
            BrowserAction::KeyPress { .. } => ActionVariant::KeyPress,
            BrowserAction::TypeText { .. } => ActionVariant::TypeText,
            BrowserAction::ClearInput { .. } => ActionVariant::ClearInput,
            BrowserAction::SelectOption { .. } => ActionVariant::SelectOption,
            BrowserAction::Navigate { .. } => ActionVariant::Navigate,
            BrowserAction::Back => ActionVariant::Back,
            BrowserAction::Forward => ActionVariant::Forward,
            BrowserAction::Refresh => ActionVariant::Refresh,
            BrowserAction::NewTab { .. } => ActionVariant::NewTab,
            BrowserAction::SwitchTab { .. } => ActionVariant::SwitchTab,
            BrowserAction::CloseTab { .. } => ActionVariant::CloseTab,
            BrowserAction::Terminate { .. } => ActionVariant::Terminate,
        }
    }

    pub fn name(&self) -> &'static str {
        self.variant().name()
    }

    /// Semantic id the action operates on, if any.
    pub fn target(&self) -> Option<&str> {
        match self {
            BrowserAction::Click { target }
            | BrowserAction::Hover { target }
            | BrowserAction::TypeText { target, .. }
            | BrowserAction::ClearInput { target }
            | BrowserAction::SelectOption { target, .. } => Some(target),
            BrowserAction::KeyPress { target, .. } => target.as_deref(),
            _ => None,
        }
    }

    pub fn is_terminate(&self) -> bool {
        matches!(self, BrowserAction::Terminate { .. })
    }
}
