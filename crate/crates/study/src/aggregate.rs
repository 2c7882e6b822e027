use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uxsim_core::Persona;

use crate::config::StudyConfig;
use crate::record::{SessionRecord, StudyRun};
use crate::sus::sus_from_survey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub agent_id: String,
    pub gender: String,
    pub shopping_frequency: String,
    pub total_actions: usize,
    pub filter_clicks: usize,
    pub sus_score: Option<f64>,
    pub filter_satisfaction: Option<i64>,
    /// Unfinished session or incomplete survey; left out of summaries.
    #[serde(default)]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single value.
    pub sd: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { n, mean: None, sd: None };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { n, mean: Some(mean), sd: Some(sd) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Rows in the group, flagged ones included.
    pub rows: usize,
    pub flagged: usize,
    pub total_actions: MetricSummary,
    pub filter_clicks: MetricSummary,
    pub sus_score: MetricSummary,
    pub filter_satisfaction: MetricSummary,
}

impl GroupSummary {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a AggregateRow>) -> Self {
        let rows: Vec<&AggregateRow> = rows.into_iter().collect();
        let kept: Vec<&AggregateRow> = rows.iter().copied().filter(|r| !r.flagged).collect();
        let col = |f: &dyn Fn(&AggregateRow) -> Option<f64>| MetricSummary::of(&kept.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        Self {
            rows: rows.len(),
            flagged: rows.len() - kept.len(),
            total_actions: col(&|r| Some(r.total_actions as f64)),
            filter_clicks: col(&|r| Some(r.filter_clicks as f64)),
            sus_score: col(&|r| r.sus_score),
            filter_satisfaction: col(&|r| r.filter_satisfaction.map(|v| v as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub rows: Vec<AggregateRow>,
    pub overall: GroupSummary,
    /// field -> value -> summary.
    pub groups: BTreeMap<String, BTreeMap<String, GroupSummary>>,
}

pub const UNKNOWN: &str = "(unknown)";

impl Aggregates {
    /// Summaries over `rows`; `groupings` pairs a field name with each row's value.
    pub fn build(rows: Vec<AggregateRow>, groupings: Vec<(String, Vec<String>)>) -> Self {
        let overall = GroupSummary::of(&rows);
        let mut groups = BTreeMap::new();
        for (field, keys) in groupings {
            let mut buckets: BTreeMap<String, Vec<&AggregateRow>> = BTreeMap::new();
            for (row, key) in rows.iter().zip(keys) {
                buckets.entry(key).or_default().push(row);
            }
            groups.insert(field, buckets.into_iter().map(|(k, v)| (k, GroupSummary::of(v))).collect());
        }
        Self { rows, overall, groups }
    }

    /// Groups by the gender and shopping-frequency columns, e.g. for
    /// imported tables that carry no personas.
    pub fn from_rows(rows: Vec<AggregateRow>) -> Self {
        let genders = rows.iter().map(|r| r.gender.clone()).collect();
        let freqs = rows.iter().map(|r| r.shopping_frequency.clone()).collect();
        Self::build(rows, vec![("Gender".into(), genders), ("Shopping Frequency".into(), freqs)])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("aggregates serialize");
        s.push('\n');
        s
    }
}

fn same_field(a: &str, b: &str) -> bool {
    let norm = |s: &str| s.trim().to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ");
    norm(a) == norm(b)
}

pub fn demographic_value(persona: &Persona, field: &str) -> Option<String> {
    persona
        .demographic(field)
        .map(str::to_string)
        .or_else(|| persona.assignment.iter().find(|(k, _)| same_field(k, field)).map(|(_, v)| v.clone()))
}

pub fn row_for(session: &SessionRecord, config: &StudyConfig) -> AggregateRow {
    let m = &config.metrics;
    let filter_clicks = session
        .action_trace
        .iter()
        .filter(|r| r.action == "click" && r.target.as_deref().is_some_and(|t| m.is_filter_target(t)))
        .count();
    let answered = !session.survey_answers.is_empty() && session.survey_error.is_none();
    let sus_score = if config.has_sus() && answered { sus_from_survey(&config.survey, &session.survey_answers).ok() } else { None };
    let filter_satisfaction = m.satisfaction_question.as_ref().and_then(|id| {
        session.survey_answers.iter().find(|a| &a.id == id).and_then(|a| a.answer.as_scale())
    });
    let flagged = !session.status.is_terminal()
        || (!config.survey.is_empty() && !answered)
        || (config.has_sus() && sus_score.is_none())
        || (m.satisfaction_question.is_some() && filter_satisfaction.is_none());
    AggregateRow {
        agent_id: session.agent_id.clone(),
        gender: demographic_value(&session.persona, &m.gender_field).unwrap_or_else(|| UNKNOWN.into()),
        shopping_frequency: demographic_value(&session.persona, &m.frequency_field).unwrap_or_else(|| UNKNOWN.into()),
        total_actions: session.action_trace.len(),
        filter_clicks,
        sus_score,
        filter_satisfaction,
        flagged,
    }
}

/// Rows in session order plus summaries per configured group field.
pub fn aggregate(run: &StudyRun) -> Aggregates {
    let m = &run.config.metrics;
    let rows: Vec<AggregateRow> = run.sessions.iter().map(|s| row_for(s, &run.config)).collect();
    let groupings = m
        .group_fields
        .iter()
        .map(|field| {
            let keys = run
                .sessions
                .iter()
                .zip(&rows)
                .map(|(s, r)| {
                    if same_field(field, &m.gender_field) {
                        r.gender.clone()
                    } else if same_field(field, &m.frequency_field) {
                        r.shopping_frequency.clone()
                    } else {
                        demographic_value(&s.persona, field).unwrap_or_else(|| UNKNOWN.into())
                    }
                })
                .collect();
            (field.clone(), keys)
        })
        .collect();
    Aggregates::build(rows, groupings)
}
