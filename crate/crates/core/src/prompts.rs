//! Prompt templates with `{{slot}}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Persona,
    Perceive,
    Planning,
    Action,
    Reflect,
    Wonder,
    MemoryImportance,
    Survey,
    Interview,
}

impl PromptKind {
    pub const ALL: [PromptKind; 9] = [
        PromptKind::Persona,
        PromptKind::Perceive,
        PromptKind::Planning,
        PromptKind::Action,
        PromptKind::Reflect,
        PromptKind::Wonder,
        PromptKind::MemoryImportance,
        PromptKind::Survey,
        PromptKind::Interview,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            PromptKind::Persona => "persona.txt",
            PromptKind::Perceive => "perceive.txt",
            PromptKind::Planning => "planning.txt",
            PromptKind::Action => "action.txt",
            PromptKind::Reflect => "reflect.txt",
            PromptKind::Wonder => "wonder.txt",
            PromptKind::MemoryImportance => "memory_importance.txt",
            PromptKind::Survey => "survey.txt",
            PromptKind::Interview => "interview.txt",
        }
    }

    /// Slots every template of this kind must contain.
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            PromptKind::Persona => &["example", "constraints"],
            PromptKind::Perceive => &["persona", "intent", "page"],
            PromptKind::Planning => &["persona", "intent", "plan", "memories"],
            PromptKind::Action => &["persona", "intent", "plan", "memories", "page", "tabs", "error", "actions"],
            PromptKind::Reflect => &["persona", "intent", "memories"],
            PromptKind::Wonder => &["persona", "memories"],
            PromptKind::MemoryImportance => &["persona", "intent", "memories"],
            PromptKind::Survey => &["persona", "intent", "memories", "questions"],
            PromptKind::Interview => &["persona", "intent", "memories", "question"],
        }
    }

    fn default_text(self) -> &'static str {
        match self {
            PromptKind::Persona => include_str!("../prompts/persona.txt"),
            PromptKind::Perceive => include_str!("../prompts/perceive.txt"),
            PromptKind::Planning => include_str!("../prompts/planning.txt"),
            PromptKind::Action => include_str!("../prompts/action.txt"),
            PromptKind::Reflect => include_str!("../prompts/reflect.txt"),
            PromptKind::Wonder => include_str!("../prompts/wonder.txt"),
            PromptKind::MemoryImportance => include_str!("../prompts/memory_importance.txt"),
            PromptKind::Survey => include_str!("../prompts/survey.txt"),
            PromptKind::Interview => include_str!("../prompts/interview.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("{file}: missing slot {{{{{slot}}}}}")]
    MissingSlot { file: String, slot: String },
    #[error("reading prompts: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    templates: BTreeMap<PromptKind, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self { templates: PromptKind::ALL.into_iter().map(|k| (k, k.default_text().to_string())).collect() }
    }
}

impl PromptSet {
    /// Defaults, with any same-named files in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::default();
        for kind in PromptKind::ALL {
            let path = dir.join(kind.file_name());
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io(e.to_string()))?;
                set.set(kind, text)?;
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, kind: PromptKind, text: String) -> Result<(), PromptError> {
        for slot in kind.slots() {
            if !text.contains(&format!("{{{{{slot}}}}}")) {
                return Err(PromptError::MissingSlot { file: kind.file_name().into(), slot: (*slot).into() });
            }
        }
        self.templates.insert(kind, text);
        Ok(())
    }

    pub fn template(&self, kind: PromptKind) -> &str {
        &self.templates[&kind]
    }

    /// Fills every slot in one pass, so slot values that contain `{{...}}`
    /// are left alone.
    pub fn render(&self, kind: PromptKind, slots: &[(&str, &str)]) -> String {
        let t = self.template(kind);
        let mut out = String::with_capacity(t.len() + slots.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut rest = t;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(end) => {
                    let name = &after[..end];
                    match slots.iter().find(|(k, _)| *k == name) {
                        Some((_, v)) => out.push_str(v),
                        None => out.push_str(&rest[start..start + end + 4]),
                    }
                    rest = &after[end + 2..];
                }
                None => {
                    out.push_str(&rest[start..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out.trim_end().to_string()
    }

    pub fn persona(&self, example: &str, constraints: &[String]) -> String {
        let lines: Vec<String> = constraints.iter().map(|c| format!("- have the {c}")).collect();
        let joined = if lines.is_empty() { "- no fixed demographics".to_string() } else { lines.join("\n") };
        self.render(PromptKind::Persona, &[("example", example.trim()), ("constraints", &joined)])
    }
}
