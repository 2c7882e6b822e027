use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use uxsim_core::{
    Agent, AgentConfig, AgentError, AgentStatus, AnswerValue, MemoryKind, MemoryStream, NewMemory, Persona, PromptSet,
    RetrievalQuery, RetrievalWeights, SlowLoopConfig, SourceModule, SurveyQuestion,
};
use uxsim_llm::{hash_embedding, Gateway, MockProvider, MockRule};
use uxsim_web::{
    BrowserAction, ConnectorConfig, ElementDescriptor, HeadlessBrowser, ObservationPayload, QuiescencePolicy,
    WebConnector,
};

fn config() -> AgentConfig {
    AgentConfig { capture: true, slow_loop: None, ..AgentConfig::default() }
}

fn agent(provider: MockProvider, cfg: AgentConfig) -> (Agent, Arc<MockProvider>) {
    let provider = Arc::new(provider);
    let a = Agent::new(Arc::new(Gateway::mock(provider.clone())), Arc::new(PromptSet::default()), Persona::example(), None, cfg)
        .unwrap();
    (a, provider)
}

fn element(id: &str, tag: &str) -> ElementDescriptor {
    ElementDescriptor { semantic_id: id.into(), tag: tag.into(), visible_text: id.into(), states: Default::default() }
}

fn page(html: &str) -> ObservationPayload {
    ObservationPayload {
        html: html.into(),
        clickable_elements: vec![element("search_button", "button"), element("sort_by", "select")],
        input_elements: vec![element("search_input", "input")],
        select_elements: vec![element("sort_by", "select")],
        ..Default::default()
    }
}

fn plan(steps: &[&str], next: usize) -> String {
    json!({"steps": steps, "rationale": "keep it simple", "next_step": next}).to_string()
}

fn decision(action: serde_json::Value, description: &str) -> String {
    json!({"action": action, "description": description}).to_string()
}

fn connector() -> WebConnector {
    WebConnector::new(
        Box::new(HeadlessBrowser::default()),
        ConnectorConfig { quiescence: QuiescencePolicy::fast(), screenshots: false },
    )
}

#[tokio::test]
async fn perception_describes_product_card() {
    let note = "A product card for Lavender Massage Lotion, rated 4.5 stars from 212 reviews, priced $14.99.";
    let (a, _) = agent(MockProvider::new().with_rule(MockRule::for_label("perceive").reply(json!({"observations": [note]}).to_string())), config());
    let obs = page("<div semantic-id=\"lavender_massage_lotion\">Lavender Massage Lotion 4.5 (212) $14.99</div>");
    let mems = a.perceive(&obs).await.unwrap();
    assert_eq!(mems.len(), 1);
    for fact in ["Lavender Massage Lotion", "4.5", "212", "$14.99"] {
        assert!(mems[0].content.contains(fact));
    }
    assert_eq!(mems[0].kind, MemoryKind::Observation);
    let prompt = &a.capture().for_module("perceive")[0].text;
    assert!(prompt.contains("Lavender Massage Lotion 4.5 (212) $14.99"));
}

#[tokio::test]
async fn perception_keeps_order_and_records_errors() {
    let reply = json!({"observations": ["header with search", "three products", "footer links"]}).to_string();
    let (a, _) = agent(MockProvider::always(reply), config());
    let mut obs = page("<p>stuff</p>");
    obs.error = Some("element not found".into());
    let mems = a.perceive(&obs).await.unwrap();
    let texts: Vec<&str> = mems.iter().map(|m| m.content.as_str()).collect();
    assert!(texts[0].contains("element not found"));
    assert_eq!(&texts[1..], ["header with search", "three products", "footer links"]);
}

#[tokio::test]
async fn perception_of_empty_page_skips_the_model() {
    let (a, provider) = agent(MockProvider::new(), config());
    let mems = a.perceive(&ObservationPayload { html: "<body> </body>".into(), ..Default::default() }).await.unwrap();
    assert_eq!(mems.len(), 1);
    assert_eq!(mems[0].content, "The page appears empty.");
    assert_eq!(provider.request_count(), 0);
}

#[tokio::test]
async fn perception_failure_keeps_only_the_error_memory() {
    let (a, _) = agent(MockProvider::always("not json"), config());
    let mut obs = page("<p>stuff</p>");
    obs.error = Some("element not found".into());
    assert!(matches!(a.perceive(&obs).await, Err(AgentError::SchemaViolation(_))));
    let all = a.stream().pieces();
    assert_eq!(all.len(), 1);
    assert!(all[0].content.contains("element not found"));
}

#[tokio::test]
async fn initial_plan_passthrough_and_rules() {
    let (a, _) = agent(MockProvider::always(plan(&["search for a sofa", "review search results", "buy one"], 2)), config());
    let p = a.plan_initial().await.unwrap();
    assert_eq!((p.steps.len(), p.next_step), (3, 0));
    assert_eq!(a.stream().pieces()[0].kind, MemoryKind::Plan);
    assert!(a.stream().pieces()[0].content.contains("review search results"));

    let (a, _) = agent(MockProvider::always(plan(&[], 0)), config());
    assert!(matches!(a.plan_initial().await, Err(AgentError::SchemaViolation(_))));
    let (a, _) = agent(MockProvider::always(plan(&["only one"], 0)), config());
    assert!(matches!(a.plan_initial().await, Err(AgentError::SchemaViolation(_))));
}

#[tokio::test]
async fn plan_updates_keep_history() {
    let first = plan(&["search for a sofa", "review search results"], 0);
    let second = plan(&["search for a sofa", "review search results", "review detailed information and consider buying"], 2);
    let (a, _) = agent(MockProvider::new().with_rule(MockRule::for_label("planning").replies([first, second])), config());
    a.plan_initial().await.unwrap();
    let p = a.plan_update(&a.stream().pieces()).await.unwrap();
    assert_eq!(p.steps.len(), 3);
    assert_eq!(p.current_step(), Some("review detailed information and consider buying"));
    let plans: Vec<_> = a.stream().pieces().into_iter().filter(|m| m.kind == MemoryKind::Plan).collect();
    assert_eq!(plans.len(), 2);
    assert_eq!(a.state().current_plan.unwrap(), p);

    let (a, provider) = agent(
        MockProvider::new().with_rule(MockRule::for_label("planning").replies([plan(&["a", "b"], 0), "oops".into()])),
        config(),
    );
    a.plan_initial().await.unwrap();
    assert!(matches!(a.plan_update(&[]).await, Err(AgentError::SchemaViolation(_))));
    assert_eq!(provider.request_count(), 5);
}

#[tokio::test]
async fn action_types_into_the_search_box() {
    let reply = decision(
        json!({"action": "type_text", "target": "search_input", "text": "massage lotion"}),
        "I'm going to search for massage lotion",
    );
    let (a, _) = agent(MockProvider::new().with_rule(MockRule::for_label("action").reply(reply)), config());
    let d = a.act(&page("<input semantic-id=\"search_input\">"), &[]).await.unwrap();
    assert_eq!(
        d.action,
        BrowserAction::TypeText { target: "search_input".into(), text: "massage lotion".into(), press_enter: false }
    );
    let last = a.stream().pieces().pop().unwrap();
    assert_eq!((last.kind, last.content.as_str()), (MemoryKind::Action, "I'm going to search for massage lotion"));
    let prompt = &a.capture().for_module("action")[0].text;
    assert!(prompt.contains("\"action\": \"terminate\""));
    assert!(!prompt.contains("scroll"));
}

#[tokio::test]
async fn invalid_target_gets_one_correction() {
    let ghost = decision(json!({"action": "click", "target": "ghost_button"}), "Clicking the ghost");
    let fixed = decision(json!({"action": "click", "target": "search_button"}), "Clicking search");
    let (a, provider) = agent(MockProvider::new().with_rule(MockRule::for_label("action").replies([ghost.clone(), fixed])), config());
    let d = a.act(&page("<p/>"), &[]).await.unwrap();
    assert_eq!(d.action, BrowserAction::Click { target: "search_button".into() });
    assert!(d.failure.is_none());
    let second = provider.requests()[1].transcript();
    assert!(second.contains("ghost_button") && second.contains("Choose again"));

    let (a, _) = agent(MockProvider::always(ghost), config());
    let d = a.act(&page("<p/>"), &[]).await.unwrap();
    assert!(d.action.is_terminate());
    assert!(d.failure.unwrap().contains("ghost_button"));
}

#[tokio::test]
async fn typing_needs_an_input_target() {
    let bad = decision(json!({"action": "type_text", "target": "search_button", "text": "x"}), "typing");
    let (a, _) = agent(MockProvider::always(bad), config());
    let d = a.act(&page("<p/>"), &[]).await.unwrap();
    assert!(d.action.is_terminate() && d.failure.is_some());
}

#[tokio::test]
async fn reflection_and_wonder() {
    let provider = MockProvider::new()
        .with_rule(MockRule::for_label("reflect").reply(json!({"insight": "The filters are hard to find."}).to_string()))
        .with_rule(MockRule::for_label("wonder").reply(json!({"thought": "I should call my sister tonight."}).to_string()))
        .with_rule(MockRule::for_label("action").reply(decision(json!({"action": "click", "target": "search_button"}), "Pressing the search button")));
    let (a, provider) = agent(provider, config());
    assert!(a.reflect().await.is_none());
    assert_eq!(provider.request_count(), 0);
    a.act(&page("<p/>"), &[]).await.unwrap();
    let r = a.reflect().await.unwrap();
    assert_eq!((r.kind, r.content.as_str()), (MemoryKind::Thought, "The filters are hard to find."));
    assert!(!r.is_wonder());
    assert!(a.capture().for_module("reflect")[0].text.contains("Pressing the search button"));
    let w = a.wonder().await.unwrap();
    assert!(w.is_wonder());
    assert_eq!(w.source_module, SourceModule::Wonder);
}

#[tokio::test]
async fn slow_modules_tolerate_gateway_failure() {
    let (a, _) = agent(MockProvider::always("garbage"), config());
    a.stream().append(NewMemory::new(SourceModule::Perception, "x", hash_embedding("x", 256, 0))).ok();
    assert!(a.wonder().await.is_none());
    assert!(a.score_importance_batch().await.is_empty());
}

#[tokio::test]
async fn importance_batch_scores_clamps_and_skips() {
    let responder = MockRule::for_label("memory_importance").respond_with(|req| {
        let ids: Vec<u64> = regex::Regex::new(r"\[id (\d+)\]")
            .unwrap()
            .captures_iter(&req.transcript())
            .map(|c| c[1].parse().unwrap())
            .collect();
        let scores: Vec<_> = ids
            .iter()
            .map(|id| {
                let v = [0.1, 0.9, 1.5][*id as usize % 3];
                json!({"id": id, "importance": v})
            })
            .collect();
        json!({"scores": scores}).to_string()
    });
    let (a, provider) = agent(MockProvider::new().with_rule(responder), config());
    let emb = |t: &str| hash_embedding(t, provider.embed_dim(), provider.embed_seed());
    for t in ["Banner ad for a credit card", "Product listing: Lavender Massage Lotion $14.99", "Checkout button"] {
        a.stream().append(NewMemory::new(SourceModule::Perception, t, emb(t))).unwrap();
    }
    let got = a.score_importance_batch().await;
    assert_eq!(got, vec![(0, 0.1), (1, 0.9), (2, 1.0)]);
    a.stream().append(NewMemory::new(SourceModule::Perception, "new", emb("new"))).unwrap();
    let again = a.score_importance_batch().await;
    assert_eq!(again, vec![(3, 0.1)]);
    let last = provider.requests().pop().unwrap().transcript();
    assert!(!last.contains("[id 0]") && last.contains("[id 3]"));
    assert!(a.score_importance_batch().await.is_empty());
    assert_eq!(provider.request_count(), 2);
}

#[tokio::test]
async fn survey_answers_are_validated() {
    let qs = [
        SurveyQuestion::likert("q1", "The site was easy to use.", 1, 5),
        SurveyQuestion::likert("q2", "The filters helped.", 1, 5),
        SurveyQuestion::likert("q3", "I would come back.", 1, 5),
    ];
    let all3 = json!({"answers": [{"id": "q1", "answer": 3}, {"id": "q2", "answer": 3}, {"id": "q3", "answer": 3}]});
    let (a, _) = agent(MockProvider::always(all3.to_string()), config());
    let answers = a.answer_survey(&qs).await.unwrap();
    assert!(answers.iter().all(|x| x.answer == AnswerValue::Scale(3)));

    let seven = json!({"answers": [{"id": "q1", "answer": 7}, {"id": "q2", "answer": 3}, {"id": "q3", "answer": 3}]});
    let (a, provider) = agent(MockProvider::always(seven.to_string()), config());
    assert!(matches!(a.answer_survey(&qs).await, Err(AgentError::SchemaViolation(_))));
    assert!(provider.requests()[1].transcript().contains("within 1..=5"));

    let open = [SurveyQuestion::open("why", "What stood out?")];
    let (a, _) = agent(MockProvider::always(json!({"answers": [{"id": "why", "answer": "The big photos."}]}).to_string()), config());
    assert_eq!(a.answer_survey(&open).await.unwrap()[0].answer, AnswerValue::Text("The big photos.".into()));
}

fn random_stream(rng: &mut ChaCha8Rng, provider: &MockProvider) -> MemoryStream {
    let s = MemoryStream::new();
    let n = rng.gen_range(1..60);
    let mut t = 0;
    for i in 0..n {
        t += rng.gen_range(0..3);
        s.set_clock(t).unwrap();
        let module = [SourceModule::Perception, SourceModule::Planning, SourceModule::Action, SourceModule::Reflection][i % 4];
        let content = format!("memory {i} about item {} at step {t}", rng.gen_range(0..10));
        let emb = hash_embedding(&content, provider.embed_dim(), provider.embed_seed());
        s.append(NewMemory::new(module, content, emb).at(t)).unwrap();
    }
    s
}

fn interviewer(stream: MemoryStream) -> (Agent, Arc<MockProvider>) {
    let provider = Arc::new(MockProvider::always("I remember the search page."));
    let gw = Arc::new(Gateway::mock(provider.clone()));
    let a = Agent::with_stream(gw, Arc::new(PromptSet::default()), Persona::example(), "buy lotion".into(), stream, config()).unwrap();
    (a, provider)
}

#[tokio::test]
async fn interview_snapshots_never_see_the_future() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let base = MockProvider::new();
    for _ in 0..100 {
        let stream = random_stream(&mut rng, &base);
        let max = stream.max_timestamp().unwrap();
        let t = rng.gen_range(0..=max);
        let (a, _) = interviewer(stream);
        let answer = a.answer_interview("What did you notice?", Some(t)).await.unwrap();
        assert_eq!(answer, "I remember the search page.");
        let cap = a.capture().for_module("interview").pop().unwrap();
        assert!(cap.retrieved.iter().all(|(_, ts)| *ts <= t));
        for (_, ts) in &cap.retrieved {
            assert!(cap.text.contains(&format!("[t={ts}]")));
        }
        let leaked = (t + 1..=max).any(|late| cap.text.contains(&format!("[t={late}]")));
        assert!(!leaked, "T={t}");
    }
}

#[tokio::test]
async fn interview_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = MockProvider::new();
    let mut stream = random_stream(&mut rng, &base);
    while stream.pieces().iter().all(|p| p.timestamp == 0) {
        stream = random_stream(&mut rng, &base);
    }
    let before = stream.len();
    let max = stream.max_timestamp().unwrap();
    let (a, provider) = interviewer(stream.clone());
    stream.set_clock(max).unwrap();

    a.answer_interview("Anything?", Some(0)).await.unwrap();
    let at0 = a.capture().for_module("interview").pop().unwrap();
    let zero = stream.pieces().iter().filter(|p| p.timestamp == 0).count();
    assert_eq!(at0.retrieved.len(), zero.min(20));

    a.answer_interview("What did you notice?", None).await.unwrap();
    let full = a.capture().for_module("interview").pop().unwrap();
    let q = RetrievalQuery {
        query_text: "What did you notice?".into(),
        query_embedding: hash_embedding("What did you notice?", provider.embed_dim(), provider.embed_seed()),
        weights: RetrievalWeights::slow(),
        now: max,
    };
    let direct: Vec<(u64, u64)> = stream.retrieve(&q).unwrap().iter().map(|p| (p.id, p.timestamp)).collect();
    assert_eq!(full.retrieved, direct);

    a.answer_interview("What did you notice?", Some(max)).await.unwrap();
    assert_eq!(a.capture().for_module("interview").pop().unwrap().retrieved, direct);

    assert!(matches!(a.answer_interview("x", Some(max + 1)).await, Err(AgentError::TimestampOutOfRange { .. })));
    assert_eq!(a.stream().len(), before);
    assert_eq!(a.interviews().len(), 3);
}

#[tokio::test]
async fn interview_at_zero_of_fresh_session_has_no_memories() {
    let (a, _) = interviewer(MemoryStream::new());
    a.answer_interview("Hello?", Some(0)).await.unwrap();
    let cap = a.capture().for_module("interview").pop().unwrap();
    assert!(cap.retrieved.is_empty());
    assert!(cap.text.contains("(nothing yet)"));
}

/// Scripted run through the fixture shop: category, subcategory, price
/// facet, add to cart, cart, checkout, terminate.
fn replay_provider() -> MockProvider {
    let steps = [
        (json!({"action": "click", "target": "grocery_gourmet_food"}), "Opening the grocery section from the top menu"),
        (json!({"action": "click", "target": "meat_substitutes_79"}), "Choosing meat substitutes in the side list"),
        (json!({"action": "click", "target": "100_00_199_99_4_item"}), "Limiting results to the $100 to $199.99 band"),
        (json!({"action": "click", "target": "add_to_cart2"}), "Adding the best-reviewed crumble to my cart"),
        (json!({"action": "click", "target": "my_cart_1_1_items"}), "Opening my cart"),
        (json!({"action": "click", "target": "proceed_to_checkout"}), "Going on to checkout"),
        (json!({"action": "terminate"}), "Done: the checkout page is open with the product I wanted"),
    ];
    MockProvider::new()
        .with_rule(MockRule::for_label("planning").reply(plan(&["find the category", "filter by price", "add the best product", "check out"], 0)))
        .with_rule(MockRule::for_label("perceive").reply(json!({"observations": ["I see a shop page."]}).to_string()))
        .with_rule(MockRule::for_label("action").replies(steps.iter().map(|(a, d)| decision(a.clone(), d))))
        .with_rule(MockRule::for_label("reflect").reply(json!({"insight": "So far so good."}).to_string()))
        .with_rule(MockRule::for_label("wonder").reply(json!({"thought": "Is it going to rain?"}).to_string()))
        .with_rule(MockRule::for_label("memory_importance").reply(json!({"scores": []}).to_string()))
}

#[tokio::test]
async fn replay_session_on_fixture_shop() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let cfg = AgentConfig { capture: true, ..AgentConfig::default() };
    let (a, _) = agent(replay_provider(), cfg);
    let mut c = connector();
    let out = a.run_session(&mut c, Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Terminated, "{:?}", out.termination_reason);
    assert_eq!(out.trace.len(), 7);
    let targets: Vec<Option<&str>> = out.trace.iter().map(|r| r.target.as_deref()).collect();
    assert_eq!(
        targets,
        [
            Some("grocery_gourmet_food"),
            Some("meat_substitutes_79"),
            Some("100_00_199_99_4_item"),
            Some("add_to_cart2"),
            Some("my_cart_1_1_items"),
            Some("proceed_to_checkout"),
            None
        ]
    );
    assert!(out.trace[..6].iter().all(|r| r.action == "click"));
    assert_eq!(out.trace[6].action, "terminate");
    for r in &out.trace {
        let v = serde_json::to_value(r).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert!(keys.iter().all(|k| ["action", "target", "description"].contains(&k.as_str())));
    }
    assert!(out.steps.iter().all(|s| s.error.is_none()), "{:?}", out.steps);
    assert!(out.steps[3].target_box.is_some());
    assert!(out.steps[6].url.as_deref().unwrap().contains("checkout"));
    let actions = a.stream().pieces().iter().filter(|p| p.kind == MemoryKind::Action).count();
    assert_eq!(actions, out.trace.len());
    assert!(c.is_terminated());
}

#[tokio::test]
async fn step_budget_exhaustion_fails_the_session() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let provider = MockProvider::new()
        .with_rule(MockRule::for_label("planning").reply(plan(&["look around", "keep looking"], 0)))
        .with_rule(MockRule::for_label("perceive").reply(json!({"observations": ["A page."]}).to_string()))
        .with_rule(MockRule::for_label("action").reply(decision(json!({"action": "refresh"}), "Reloading")));
    let (a, _) = agent(provider, AgentConfig { step_budget: 2, ..config() });
    let out = a.run_session(&mut connector(), Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Failed);
    assert!(out.termination_reason.unwrap().contains("step budget of 2"));
    assert_eq!(out.trace.len(), 2);
}

#[tokio::test]
async fn invalid_target_twice_ends_the_session_as_failed() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let provider = MockProvider::new()
        .with_rule(MockRule::for_label("planning").reply(plan(&["a", "b"], 0)))
        .with_rule(MockRule::for_label("perceive").reply(json!({"observations": ["A page."]}).to_string()))
        .with_rule(MockRule::for_label("action").reply(decision(json!({"action": "click", "target": "ghost_button"}), "Clicking")));
    let (a, _) = agent(provider, config());
    let out = a.run_session(&mut connector(), Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Failed);
    assert_eq!(out.trace.len(), 1);
    assert_eq!(out.trace[0].action, "terminate");
    assert!(out.termination_reason.unwrap().contains("ghost_button"));
}

#[tokio::test]
async fn lost_browser_fails_the_session() {
    let provider = MockProvider::new().with_rule(MockRule::for_label("planning").reply(plan(&["a", "b"], 0)));
    let (a, _) = agent(provider, config());
    let mut c = connector();
    c.shutdown().await.unwrap();
    let out = a.run_session(&mut c, Some("http://127.0.0.1:9/")).await;
    assert_eq!(out.status, AgentStatus::Failed);
    assert!(out.termination_reason.unwrap().contains("browser"));
}

/// Fast-loop calls take `fast`; reflection takes ten fast steps.
fn dual_loop_provider(fast: Duration, actions: usize) -> MockProvider {
    let n = AtomicUsize::new(0);
    let slow = fast * 3 * 10;
    MockProvider::new()
        .with_rule(MockRule::for_label("planning").reply(plan(&["browse the shop", "finish"], 0)).with_delay(fast))
        .with_rule(MockRule::for_label("perceive").reply(json!({"observations": ["The shop home page."]}).to_string()).with_delay(fast))
        .with_rule(
            MockRule::for_label("action")
                .respond_with(move |_| {
                    if n.fetch_add(1, Ordering::Relaxed) + 1 < actions {
                        decision(json!({"action": "refresh"}), "Reloading the page to browse the shop")
                    } else {
                        decision(json!({"action": "terminate"}), "Finished browsing the shop")
                    }
                })
                .with_delay(fast),
        )
        .with_rule(
            MockRule::for_label("reflect")
                .reply(json!({"insight": "Browsing the shop home page keeps showing the same items."}).to_string())
                .with_delay(slow),
        )
        .with_rule(MockRule::for_label("wonder").reply(json!({"thought": "Did I water the plants?"}).to_string()))
        .with_rule(MockRule::for_label("memory_importance").reply(json!({"scores": []}).to_string()))
}

#[tokio::test]
async fn slow_loop_does_not_block_the_fast_loop() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let cfg = AgentConfig {
        capture: true,
        slow_loop: Some(SlowLoopConfig { every_steps: 3, reflect: true, wonder: false, importance: false }),
        ..AgentConfig::default()
    };
    let (a, _) = agent(dual_loop_provider(Duration::from_millis(5), 30), cfg);
    let out = a.run_session(&mut connector(), Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Terminated);
    let reflect_prompt = a.capture().for_module("reflect").into_iter().next().expect("a reflection started");
    let reflection = a
        .stream()
        .pieces()
        .into_iter()
        .find(|p| p.source_module == SourceModule::Reflection)
        .expect("a reflection landed");
    let in_flight = out.steps.iter().filter(|s| s.timestamp > reflect_prompt.step && s.timestamp <= reflection.timestamp).count();
    assert!(in_flight >= 3, "only {in_flight} actions while reflecting");
    let used_later = a
        .capture()
        .entries()
        .iter()
        .any(|e| (e.module == "action" || e.module == "planning") && e.step >= reflection.timestamp && e.contains_memory(reflection.id));
    assert!(used_later);
}

#[tokio::test]
async fn sessions_run_without_a_slow_loop() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (a, _) = agent(dual_loop_provider(Duration::ZERO, 5), config());
    let out = a.run_session(&mut connector(), Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Terminated);
    assert_eq!(out.trace.len(), 5);
    assert!(a.stream().pieces().iter().all(|p| p.kind != MemoryKind::Thought));
    assert!(a.capture().for_module("reflect").is_empty());
}

#[tokio::test]
async fn every_memory_respects_module_kind_and_clock() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let cfg = AgentConfig { capture: true, slow_loop: Some(SlowLoopConfig { every_steps: 1, ..Default::default() }), ..AgentConfig::default() };
    let (a, _) = agent(dual_loop_provider(Duration::from_millis(2), 8), cfg);
    let out = a.run_session(&mut connector(), Some(&shop.url("/"))).await;
    assert_eq!(out.status, AgentStatus::Terminated);
    let pieces = a.stream().pieces();
    assert!(pieces.iter().all(|p| p.kind == p.source_module.kind()));
    assert!(pieces.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    assert!(pieces.iter().all(|p| p.timestamp <= a.state().step_clock));
    assert!(pieces.iter().all(|p| p.timestamp >= 1));
}
