use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uxsim_core::{validate_questions, DemographicSpec, Persona, QuestionKind, SurveyQuestion};

use crate::sus::{sus_item, SUS_ITEMS};
use crate::StudyError;

/// The example persona, either as a sheet or already structured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PersonaInput {
    Sheet(String),
    Structured(Box<Persona>),
}

impl PersonaInput {
    pub fn resolve(&self) -> Result<Persona, StudyError> {
        match self {
            PersonaInput::Sheet(text) => Persona::parse(text).map_err(|e| StudyError::Config(format!("example_persona: {e}"))),
            PersonaInput::Structured(p) => Ok((**p).clone()),
        }
    }
}

impl Default for PersonaInput {
    fn default() -> Self {
        PersonaInput::Sheet(uxsim_core::EXAMPLE_PERSONA.to_string())
    }
}

/// How per-agent numbers are pulled out of sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// A click counts as a filter click when its target is listed here...
    #[serde(default)]
    pub filter_ids: Vec<String>,
    /// ...or starts with one of these prefixes.
    #[serde(default)]
    pub filter_prefixes: Vec<String>,
    /// Survey question whose Likert answer fills the satisfaction column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction_question: Option<String>,
    #[serde(default = "default_gender_field")]
    pub gender_field: String,
    #[serde(default = "default_frequency_field")]
    pub frequency_field: String,
    /// Demographic fields to summarize by.
    #[serde(default = "default_group_fields")]
    pub group_fields: Vec<String>,
}

fn default_gender_field() -> String {
    "Gender".into()
}

fn default_frequency_field() -> String {
    "Shopping Frequency".into()
}

fn default_group_fields() -> Vec<String> {
    vec![default_gender_field()]
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            filter_ids: Vec::new(),
            filter_prefixes: Vec::new(),
            satisfaction_question: None,
            gender_field: default_gender_field(),
            frequency_field: default_frequency_field(),
            group_fields: default_group_fields(),
        }
    }
}

impl MetricsConfig {
    pub fn is_filter_target(&self, target: &str) -> bool {
        self.filter_ids.iter().any(|id| id == target) || self.filter_prefixes.iter().any(|p| target.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub url: String,
    /// Given to every participant; when empty each persona's own intent is used.
    #[serde(default)]
    pub task: String,
    pub n_participants: usize,
    #[serde(default)]
    pub example_persona: PersonaInput,
    pub demographic_spec: DemographicSpec,
    #[serde(default)]
    pub survey: Vec<SurveyQuestion>,
    #[serde(default)]
    pub interview_protocol: Vec<String>,
    #[serde(default = "default_step_budget")]
    pub step_budget: usize,
    #[serde(default)]
    pub screenshot_mode: bool,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Fixed at run creation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

fn default_step_budget() -> usize {
    50
}

fn default_parallelism() -> usize {
    4
}

impl StudyConfig {
    pub fn new(url: impl Into<String>, task: impl Into<String>, n_participants: usize, demographic_spec: DemographicSpec) -> Self {
        Self {
            url: url.into(),
            task: task.into(),
            n_participants,
            example_persona: PersonaInput::default(),
            demographic_spec,
            survey: Vec::new(),
            interview_protocol: Vec::new(),
            step_budget: default_step_budget(),
            screenshot_mode: false,
            parallelism: default_parallelism(),
            metrics: MetricsConfig::default(),
            rng_seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, StudyError> {
        let c: Self = serde_json::from_str(text).map_err(|e| StudyError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        let text = std::fs::read_to_string(path).map_err(|e| StudyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::Config(m));
        if self.url.trim().is_empty() {
            return bad("url must not be empty".into());
        }
        if self.n_participants == 0 {
            return bad("n_participants must be at least 1".into());
        }
        if self.step_budget == 0 {
            return bad("step_budget must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        self.demographic_spec.validate().map_err(|e| StudyError::Config(e.to_string()))?;
        validate_questions(&self.survey).map_err(|e| StudyError::Config(e.to_string()))?;
        let mut sus_seen = BTreeSet::new();
        for q in &self.survey {
            let Some(tag) = q.instrument_tag.as_deref() else { continue };
            if !tag.starts_with("sus:") {
                continue;
            }
            let Some(n) = sus_item(tag) else { return bad(format!("question '{}': unknown SUS tag {tag:?}", q.id)) };
            if q.kind != QuestionKind::Likert || q.scale != Some((1, 5)) {
                return bad(format!("question '{}': SUS items are Likert 1..5", q.id));
            }
            if !sus_seen.insert(n) {
                return bad(format!("SUS item {n} appears twice"));
            }
        }
        if !sus_seen.is_empty() && sus_seen.len() != SUS_ITEMS {
            return bad(format!("SUS needs all {SUS_ITEMS} items, found {}", sus_seen.len()));
        }
        if let Some(id) = &self.metrics.satisfaction_question {
            match self.survey.iter().find(|q| &q.id == id) {
                Some(q) if q.kind == QuestionKind::Likert => {}
                Some(_) => return bad(format!("satisfaction question '{id}' must be Likert")),
                None => return bad(format!("satisfaction question '{id}' is not in the survey")),
            }
        }
        if self.interview_protocol.iter().any(|q| q.trim().is_empty()) {
            return bad("interview questions must not be empty".into());
        }
        self.example_persona.resolve()?;
        Ok(())
    }

    pub fn has_sus(&self) -> bool {
        self.survey.iter().any(|q| q.instrument_tag.as_deref().and_then(sus_item).is_some())
    }
}
