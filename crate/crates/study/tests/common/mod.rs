#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde_json::json;
use uxsim_core::{AgentConfig, DemographicField, DemographicSpec, SamplingMode, SlowLoopConfig, SurveyQuestion};
use uxsim_llm::{ChatRequest, Gateway, MockProvider, MockRule};
use uxsim_study::{sus_questions, Gateways, RunStore, StudyConfig, StudyRunner};
use async_trait::async_trait;
use uxsim_web::{BrowserDriver, BrowserFactory, ConnectorConfig, DriverError, HeadlessBrowser, HeadlessFactory, QuiescencePolicy};

pub const REPLAY: [(&str, Option<&str>, &str); 7] = [
    ("click", Some("grocery_gourmet_food"), "Opening the grocery section from the top menu"),
    ("click", Some("meat_substitutes_79"), "Choosing meat substitutes in the side list"),
    ("click", Some("100_00_199_99_4_item"), "Limiting results to the $100 to $199.99 band"),
    ("click", Some("add_to_cart2"), "Adding the best-reviewed crumble to my cart"),
    ("click", Some("my_cart_1_1_items"), "Opening my cart"),
    ("click", Some("proceed_to_checkout"), "Going on to checkout"),
    ("terminate", None, "Done: the checkout page is open with the product I wanted"),
];

pub fn plan_reply() -> String {
    json!({"steps": ["find the category", "filter by price", "add the best product", "check out"], "rationale": "shortest path", "next_step": 0})
        .to_string()
}

pub fn decision(action: &str, target: Option<&str>, description: &str) -> String {
    let mut a = json!({ "action": action });
    if let Some(t) = target {
        a["target"] = json!(t);
    }
    json!({"action": a, "description": description}).to_string()
}

/// Name from the `Persona:` line of a prompt.
pub fn persona_name(req: &ChatRequest) -> String {
    let t = req.transcript();
    t.lines().find_map(|l| l.strip_prefix("Persona: ")).unwrap_or("someone").trim().to_string()
}

/// Survey reply: odd SUS items `odd`, even items `even`, satisfaction `sat`.
pub fn survey_reply(odd: i64, even: i64, sat: i64) -> String {
    let mut answers: Vec<serde_json::Value> =
        (1..=10).map(|i| json!({"id": format!("sus_{i}"), "answer": if i % 2 == 1 { odd } else { even }})).collect();
    answers.push(json!({"id": "filter_satisfaction", "answer": sat}));
    answers.push(json!({"id": "comments", "answer": "The price filter was easy to spot."}));
    json!({ "answers": answers }).to_string()
}

/// Scripted participant that walks the replay path on the fixture shop.
/// Perception echoes the persona's name so prompts can be audited.
pub fn shop_session(action_delay: Duration) -> MockProvider {
    shop_session_with(MockRule::for_label("action").replies(REPLAY.iter().map(|(a, t, d)| decision(a, *t, d))).with_delay(action_delay))
}

/// [`shop_session`] with a custom rule for action decisions.
pub fn shop_session_with(action: MockRule) -> MockProvider {
    MockProvider::new()
        .with_rule(action)
        .with_rule(MockRule::for_label("planning").reply(plan_reply()))
        .with_rule(MockRule::for_label("perceive").respond_with(|req| {
            json!({"observations": [format!("{} looks over the shop page.", persona_name(req))]}).to_string()
        }))
        .with_rule(MockRule::for_label("reflect").respond_with(|req| json!({"insight": format!("{} is making progress.", persona_name(req))}).to_string()))
        .with_rule(MockRule::for_label("wonder").reply(json!({"thought": "Did I water the plants?"}).to_string()))
        .with_rule(MockRule::for_label("memory_importance").reply(json!({"scores": []}).to_string()))
        .with_rule(MockRule::for_label("survey").reply(survey_reply(4, 2, 4)))
        .with_rule(MockRule::for_label("interview").respond_with(|req| format!("{} here: the filters helped.", persona_name(req))))
}

pub fn sheet(name: &str) -> String {
    format!(
        "Persona: {name}\n\nBackground:\nGrew up in a river town and now rents a flat above a bakery.\n\n\
         Demographics:\nAge: 37\nGender: unspecified\nEducation: Bachelor's degree\nProfession: Surveyor\nIncome: $64,000\n\n\
         Financial Situation:\nSteady income, careful with big purchases.\n\n\
         Shopping Habits:\nOrders groceries online every other week and reads reviews first.\n\n\
         Professional Life:\nMeasures land for a county office.\n\n\
         Personal Style:\nPractical layers and sturdy shoes.\n\nIntent:\nbuy a high-protein meat substitute for the week\n"
    )
}

/// Persona writer giving each sheet a distinct name `Avery QnZ`.
pub fn persona_writer() -> Arc<Gateway> {
    let n = AtomicUsize::new(0);
    let p = MockProvider::new().with_rule(MockRule::for_label("persona").respond_with(move |_| {
        let i = n.fetch_add(1, Ordering::Relaxed) + 1;
        sheet(&format!("Avery Q{i}Z"))
    }));
    Arc::new(Gateway::mock(Arc::new(p)))
}

pub fn spec() -> DemographicSpec {
    DemographicSpec::new(
        vec![
            DemographicField::uniform("Gender", ["Male", "Female", "Non-Binary"]),
            DemographicField::new("Shopping Frequency", [("Weekly", 1.0), ("Monthly", 2.0), ("Yearly", 0.5)]),
        ],
        SamplingMode::WeightedRandom,
    )
    .unwrap()
}

pub fn placeholder_sus() -> Vec<SurveyQuestion> {
    let texts: [String; 10] = std::array::from_fn(|i| format!("Placeholder usability statement {}", i + 1));
    sus_questions(&texts)
}

pub fn study_config(url: &str, n: usize) -> StudyConfig {
    let mut c = StudyConfig::new(url, "buy the highest rated meat substitute priced $100 to $199.99", n, spec());
    c.survey = placeholder_sus();
    c.survey.push(SurveyQuestion::likert("filter_satisfaction", "How satisfied were you with the filters?", 1, 5));
    c.survey.push(SurveyQuestion::open("comments", "Anything else?"));
    c.interview_protocol = vec!["What was the hardest part?".into()];
    c.metrics.filter_ids = vec!["100_00_199_99_4_item".into()];
    c.metrics.filter_prefixes = vec!["meat_substitutes".into()];
    c.metrics.satisfaction_question = Some("filter_satisfaction".into());
    c.metrics.group_fields = vec!["Gender".into(), "Shopping Frequency".into()];
    c.step_budget = 12;
    c.parallelism = 4;
    c.rng_seed = Some(11);
    c
}

pub fn agent_config() -> AgentConfig {
    AgentConfig { capture: true, slow_loop: Some(SlowLoopConfig::default()), ..AgentConfig::default() }
}

pub fn connector_config() -> ConnectorConfig {
    ConnectorConfig { quiescence: QuiescencePolicy::fast(), screenshots: false }
}

/// Per-session scripted gateways; `make` builds the provider for one agent id.
pub fn gateways(make: impl Fn(&str) -> MockProvider + Send + Sync + 'static) -> Gateways {
    Gateways::per_session(persona_writer(), move |_, aid| Arc::new(Gateway::mock(Arc::new(make(aid)))))
}

pub fn runner(store: RunStore, gateways: Gateways, browsers: Arc<dyn BrowserFactory>) -> StudyRunner {
    StudyRunner::new(store, gateways, browsers).with_connector_config(connector_config()).with_agent_config(agent_config())
}

pub fn headless() -> Arc<dyn BrowserFactory> {
    Arc::new(HeadlessFactory::default())
}

/// Headless factory that keeps a handle on every browser it launches.
#[derive(Default)]
pub struct TrackingFactory {
    pub launched: Mutex<Vec<HeadlessBrowser>>,
}

#[async_trait]
impl BrowserFactory for TrackingFactory {
    async fn launch(&self) -> Result<Box<dyn BrowserDriver>, DriverError> {
        let b = HeadlessBrowser::default();
        self.launched.lock().push(b.clone());
        Ok(Box::new(b))
    }
}

/// Agent behavior table: id, gender, frequency, actions, filter clicks, SUS, satisfaction.
pub const TABLE: [(u32, &str, &str, usize, usize, f64, i64); 20] = [
    (1, "Male", "Monthly", 18, 7, 45.0, 2),
    (2, "Non-Binary", "Monthly", 19, 2, 62.5, 5),
    (3, "Female", "Monthly", 8, 2, 75.0, 5),
    (4, "Non-Binary", "Weekly", 7, 2, 75.0, 5),
    (5, "Non-Binary", "Monthly", 8, 2, 75.0, 5),
    (6, "Female", "Monthly", 9, 0, 70.0, 3),
    (7, "Female", "Weekly", 16, 2, 72.5, 5),
    (8, "Male", "Yearly", 18, 1, 35.0, 4),
    (9, "Male", "Weekly", 21, 0, 42.5, 3),
    (10, "Non-Binary", "Weekly", 20, 11, 72.5, 4),
    (11, "Female", "Monthly", 11, 0, 75.0, 3),
    (12, "Female", "Yearly", 27, 0, 35.0, 2),
    (13, "Non-Binary", "Monthly", 14, 0, 70.0, 3),
    (14, "Non-Binary", "Monthly", 15, 1, 32.5, 4),
    (15, "Female", "Weekly", 16, 0, 50.0, 3),
    (16, "Non-Binary", "Monthly", 14, 2, 47.5, 4),
    (17, "Male", "Yearly", 13, 2, 52.5, 4),
    (18, "Male", "Monthly", 7, 0, 75.0, 3),
    (19, "Non-Binary", "Weekly", 13, 5, 35.0, 4),
    (20, "Male", "Monthly", 12, 1, 77.5, 5),
];

pub fn table_rows() -> Vec<uxsim_study::AggregateRow> {
    TABLE
        .iter()
        .map(|&(id, g, f, actions, clicks, sus, sat)| uxsim_study::AggregateRow {
            agent_id: id.to_string(),
            gender: g.into(),
            shopping_frequency: f.into(),
            total_actions: actions,
            filter_clicks: clicks,
            sus_score: Some(sus),
            filter_satisfaction: Some(sat),
            flagged: false,
        })
        .collect()
}

/// Likert answers for the ten SUS items that score exactly `score`.
pub fn sus_answers_for(score: f64) -> [i64; 10] {
    let mut raw = (score / 2.5).round() as i64;
    assert!((0..=40).contains(&raw) && (raw as f64 * 2.5 - score).abs() < 1e-9, "{score} is not a SUS score");
    std::array::from_fn(|i| {
        let c = raw.min(4);
        raw -= c;
        if i % 2 == 0 { 1 + c } else { 5 - c }
    })
}

/// A terminated session whose trace and survey reproduce one table row under [`study_config`].
pub fn session_for(row: &uxsim_study::AggregateRow) -> uxsim_study::SessionRecord {
    use uxsim_core::{AnswerValue, Persona, SurveyAnswer, TraceRecord};
    let mut p = Persona::example();
    p.name = format!("Participant {}", row.agent_id);
    p.set_demographic("Gender", row.gender.clone());
    p.set_demographic("Shopping Frequency", row.shopping_frequency.clone());
    let mut s = uxsim_study::SessionRecord::pending(row.agent_id.clone(), p);
    s.status = uxsim_study::SessionStatus::Terminated;
    s.action_trace = (0..row.total_actions)
        .map(|i| {
            let (action, target) = if i + 1 == row.total_actions && i >= row.filter_clicks {
                ("terminate", None)
            } else if i < row.filter_clicks {
                ("click", Some(if i % 2 == 0 { "100_00_199_99_4_item".to_string() } else { format!("meat_substitutes_{i}") }))
            } else if i % 3 == 0 {
                ("type", Some("search_entire_store_here".to_string()))
            } else {
                ("click", Some(format!("product_{i}")))
            };
            TraceRecord { action: action.into(), target, description: format!("step {i}") }
        })
        .collect();
    let sus = sus_answers_for(row.sus_score.unwrap());
    s.survey_answers = (1..=10).map(|i| SurveyAnswer { id: format!("sus_{i}"), answer: AnswerValue::Scale(sus[i - 1]) }).collect();
    s.survey_answers.push(SurveyAnswer { id: "filter_satisfaction".into(), answer: AnswerValue::Scale(row.filter_satisfaction.unwrap()) });
    s.survey_answers.push(SurveyAnswer { id: "comments".into(), answer: AnswerValue::Text("fine".into()) });
    s
}

/// A completed run made of [`session_for`] sessions.
pub fn run_of(rows: &[uxsim_study::AggregateRow]) -> uxsim_study::StudyRun {
    uxsim_study::StudyRun {
        run_id: "table".into(),
        config: study_config("http://shop.test/", rows.len().max(1)),
        sessions: rows.iter().map(session_for).collect(),
        started_at: chrono::Utc::now(),
        finished_at: None,
        status: uxsim_study::RunStatus::Completed,
        error: None,
    }
}
