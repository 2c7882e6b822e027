mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::*;
use uxsim_core::{CapturedPrompt, TraceRecord};
use uxsim_llm::{MockProvider, MockRule};
use uxsim_study::{
    aggregate, Gateways, RunStatus, RunStore, SessionStatus, StudyConfig, StudyError, StudyRunner,
};

fn temp_store() -> (tempfile::TempDir, RunStore) {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs")).unwrap();
    (dir, store)
}

#[tokio::test]
async fn two_scripted_participants_complete() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store.clone(), gateways(|_| shop_session(Duration::ZERO)), headless());
    let run = r.run_study(study_config(&shop.url("/"), 2)).await.unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(run.sessions.len(), 2);
    for s in &run.sessions {
        assert_eq!(s.status, SessionStatus::Terminated, "{:?}", s.termination_reason);
        assert_eq!(s.action_trace.len(), 7);
        assert_eq!(s.action_trace.last().unwrap().action, "terminate");
        assert_eq!(store.read_trace(&run.run_id, &s.agent_id).unwrap(), s.action_trace);
        assert_eq!(store.read_steps(&run.run_id, &s.agent_id).unwrap().len(), 7);
        assert_eq!(s.reasoning_trace.as_deref(), Some(format!("agents/{}/memory.jsonl", s.agent_id).as_str()));
        assert!(!store.read_memory(&run.run_id, &s.agent_id).unwrap().is_empty());
        assert_eq!(s.survey_answers.len(), 12);
        assert_eq!(s.interviews.len(), 1);
        assert_eq!(s.interviews[0].question, "What was the hardest part?");
        assert!(s.interviews[0].answer.contains(&s.persona.name));
        assert!(s.persona.assignment.contains_key("Gender"));
    }
    assert!(store.personas_dir(&run.run_id).unwrap().join("manifest.json").is_file());

    let agg = aggregate(&run);
    for row in &agg.rows {
        assert_eq!((row.total_actions, row.filter_clicks), (7, 2));
        assert_eq!(row.sus_score, Some(75.0));
        assert_eq!(row.filter_satisfaction, Some(4));
        assert!(!row.flagged);
    }
    assert_eq!(agg.overall.total_actions.mean, Some(7.0));
    assert_eq!(agg.overall.total_actions.sd, Some(0.0));
}

#[tokio::test]
async fn aggregates_on_disk_are_reproducible() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store.clone(), gateways(|_| shop_session(Duration::ZERO)), headless());
    let run = r.run_study(study_config(&shop.url("/"), 3)).await.unwrap();
    let on_disk = store.read_run_file(&run.run_id, "aggregates.json").unwrap();
    let reloaded = store.load_run(&run.run_id).unwrap();
    assert_eq!(aggregate(&reloaded).to_json().into_bytes(), on_disk);
    assert_eq!(reloaded, run);
}

#[tokio::test]
async fn killed_browser_fails_only_its_session() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let factory = Arc::new(TrackingFactory::default());
    let f = factory.clone();
    let gws = gateways(move |aid| {
        if aid != "1" {
            return shop_session(Duration::ZERO);
        }
        // Agent 1 runs first (parallelism 1); its browser dies at the third decision.
        let f = f.clone();
        let calls = AtomicUsize::new(0);
        shop_session_with(MockRule::for_label("action").respond_with(move |_| {
            let i = calls.fetch_add(1, Ordering::SeqCst);
            if i == 2 {
                f.launched.lock()[0].kill();
            }
            let (a, t, d) = REPLAY[i.min(6)];
            decision(a, t, d)
        }))
    });
    let r = runner(store, gws, factory.clone());
    let mut cfg = study_config(&shop.url("/"), 2);
    cfg.parallelism = 1;
    let run = r.run_study(cfg).await.unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    let one = run.session("1").unwrap();
    let two = run.session("2").unwrap();
    assert_eq!(one.status, SessionStatus::Failed);
    assert!(one.termination_reason.as_deref().unwrap().contains("browser"), "{:?}", one.termination_reason);
    assert_eq!(one.action_trace.len(), 3);
    assert_eq!(two.status, SessionStatus::Terminated);
    assert_eq!(two.action_trace.len(), 7);
    let rows = aggregate(&run).rows;
    // The survey still runs after a failure, so the row keeps its answers.
    let one_row = rows.iter().find(|r| r.agent_id == "1").unwrap();
    assert_eq!((one_row.total_actions, one_row.sus_score, one_row.flagged), (3, Some(75.0), false));
}

#[tokio::test]
async fn no_agent_sees_another_agents_memories() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store.clone(), gateways(|_| shop_session(Duration::ZERO)), headless());
    let run = r.run_study(study_config(&shop.url("/"), 3)).await.unwrap();
    let names: Vec<String> = run.sessions.iter().map(|s| s.persona.name.clone()).collect();
    assert_eq!(names.iter().collect::<std::collections::BTreeSet<_>>().len(), 3);
    for s in &run.sessions {
        let raw = std::fs::read_to_string(store.agent_dir(&run.run_id, &s.agent_id).unwrap().join("prompts.jsonl")).unwrap();
        let prompts: Vec<CapturedPrompt> = raw.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(prompts.iter().any(|p| p.module == "action"));
        assert!(prompts.iter().any(|p| p.text.contains(&format!("{} looks over", s.persona.name))));
        for p in &prompts {
            for other in names.iter().filter(|n| **n != s.persona.name) {
                assert!(!p.text.contains(other.as_str()), "agent {} saw {other} in a {} prompt", s.agent_id, p.module);
            }
        }
    }
}

#[tokio::test]
async fn screenshots_are_stored_per_step() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store.clone(), gateways(|_| shop_session(Duration::ZERO)), headless());
    let mut cfg = study_config(&shop.url("/"), 1);
    cfg.screenshot_mode = true;
    let run = r.run_study(cfg).await.unwrap();
    let s = &run.sessions[0];
    assert_eq!(s.screenshots.len(), 7);
    for (i, shot) in s.screenshots.iter().enumerate() {
        assert_eq!(shot.step, i);
        let png = std::fs::read(store.screenshot_path(&shot.reference).unwrap()).unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }
    assert!(store.screenshot_path("../etc/passwd").is_none());
    assert!(store.screenshot_path("a/../b/step_000.png").is_none());
}

#[tokio::test]
async fn interviews_on_finished_sessions() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store.clone(), gateways(|_| shop_session(Duration::ZERO)), headless());
    let mut cfg = study_config(&shop.url("/"), 1);
    cfg.interview_protocol.clear();
    let run = r.run_study(cfg).await.unwrap();
    let id = &run.run_id;
    let max = store.read_memory(id, "1").unwrap().max_timestamp().unwrap();

    let at0 = r.interview(id, "1", "What did you expect to see first?", Some(0)).await.unwrap();
    assert_eq!(at0.context.as_deref(), Some(&[][..]));
    let full = r.interview(id, "1", "Why did you pick that product?", None).await.unwrap();
    assert!(!full.context.as_ref().unwrap().is_empty());
    assert!(full.record.answer.contains(&run.sessions[0].persona.name));

    let t = max / 2;
    let a = r.interview(id, "1", "How did the filters feel?", Some(t)).await.unwrap();
    let b = r.interview(id, "1", "How did the filters feel?", Some(t)).await.unwrap();
    assert_eq!(a.context, b.context);
    assert_eq!(a.prompt, b.prompt);
    assert!(a.context.unwrap().iter().all(|m| m.timestamp <= t));

    assert!(matches!(
        r.interview(id, "1", "Later?", Some(max + 1)).await,
        Err(StudyError::TimestampOutOfRange { .. })
    ));
    assert!(matches!(r.interview(id, "9", "Hi?", None).await, Err(StudyError::UnknownAgent(_))));
    assert!(matches!(r.interview("nope", "1", "Hi?", None).await, Err(StudyError::UnknownRun(_))));
    assert!(matches!(r.interview(id, "1", "  ", None).await, Err(StudyError::InvalidQuestion(_))));

    let rec = store.read_session(id, "1").unwrap();
    assert_eq!(rec.interviews.len(), 4);
    assert_eq!(rec.interviews[0].timestamp, Some(0));
    assert_eq!(rec.interviews[1].timestamp, None);
    // Interviews never enter the memory stream.
    assert_eq!(store.read_memory(id, "1").unwrap().max_timestamp(), Some(max));
}

#[tokio::test]
async fn interview_on_a_live_session_is_kept() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = Arc::new(runner(store.clone(), gateways(|_| shop_session(Duration::from_millis(60))), headless()));
    let mut cfg = study_config(&shop.url("/"), 1);
    cfg.interview_protocol.clear();
    let id = r.launch(cfg).unwrap();
    let agent = loop {
        if let Some(a) = r.live_agent(&id, "1") {
            if a.stream().clock() >= 3 {
                break a;
            }
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    };
    let out = r.interview(&id, "1", "What are you doing right now?", None).await.unwrap();
    assert!(out.record.answer.contains("filters helped"));
    assert!(agent.interviews().iter().any(|i| i.question == "What are you doing right now?"));
    let run = loop {
        let run = store.load_run(&id).unwrap();
        if run.status.is_terminal() {
            break run;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    let s = &run.sessions[0];
    assert_eq!(s.status, SessionStatus::Terminated);
    assert_eq!(s.interviews.len(), 1);
    assert!(r.live_agent(&id, "1").is_none());
}

#[tokio::test]
async fn failed_personas_shrink_the_run() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    // The second persona gets four unusable replies (first try plus three retries).
    let calls = AtomicUsize::new(0);
    let writer = MockProvider::new().with_rule(MockRule::for_label("persona").respond_with(move |_| {
        let i = calls.fetch_add(1, Ordering::SeqCst);
        if (1..=4).contains(&i) {
            "not a persona".to_string()
        } else {
            sheet(&format!("Avery Q{i}Z"))
        }
    }));
    let gws = Gateways::per_session(Arc::new(uxsim_llm::Gateway::mock(Arc::new(writer))), |_, _| {
        Arc::new(uxsim_llm::Gateway::mock(Arc::new(shop_session(Duration::ZERO))))
    });
    let r = runner(store, gws, headless());
    let mut cfg = study_config(&shop.url("/"), 3);
    cfg.parallelism = 1;
    let run = r.run_study(cfg).await.unwrap();
    let ids: Vec<&str> = run.sessions.iter().map(|s| s.agent_id.as_str()).collect();
    assert_eq!(ids, ["1", "3"]);
    assert!(run.sessions.len() <= run.config.n_participants);
    assert!(run.sessions.iter().all(|s| s.status == SessionStatus::Terminated));
}

#[tokio::test]
async fn run_fails_cleanly_when_no_persona_is_generated() {
    let (_d, store) = temp_store();
    let gws = Gateways::shared(Arc::new(uxsim_llm::Gateway::mock(Arc::new(MockProvider::always("garbage")))));
    let r = StudyRunner::new(store, gws, headless());
    let run = r.run_study(study_config("http://127.0.0.1:9/", 2)).await.unwrap();
    assert_eq!(run.status, RunStatus::Failed);
    assert!(run.error.unwrap().contains("persona"));
    assert!(run.sessions.is_empty());
}

#[test]
fn config_validation() {
    let ok = study_config("http://shop.test/", 2);
    ok.validate().unwrap();
    let check = |f: &dyn Fn(&mut StudyConfig)| {
        let mut c = ok.clone();
        f(&mut c);
        c.validate()
    };
    assert!(matches!(check(&|c| c.n_participants = 0), Err(StudyError::Config(_))));
    assert!(check(&|c| c.url.clear()).is_err());
    assert!(check(&|c| c.parallelism = 0).is_err());
    assert!(check(&|c| {
        c.survey.remove(3);
    })
    .is_err());
    assert!(check(&|c| c.survey[0].scale = Some((1, 7))).is_err());
    assert!(check(&|c| c.survey[1].instrument_tag = Some("sus:1".into())).is_err());
    assert!(check(&|c| c.survey[10].scale = None).is_err());
    assert!(check(&|c| c.metrics.satisfaction_question = Some("comments".into())).is_err());
    assert!(check(&|c| c.metrics.satisfaction_question = Some("missing".into())).is_err());
    assert!(check(&|c| c.example_persona = uxsim_study::PersonaInput::Sheet("Persona: X".into())).is_err());
    assert!(check(&|c| c.survey.clear()).is_err(), "satisfaction question must exist");

    let json = serde_json::to_string(&ok).unwrap();
    assert_eq!(StudyConfig::from_json(&json).unwrap(), ok);
    let minimal = r#"{"url": "http://shop.test/", "n_participants": 1,
        "demographic_spec": {"fields": [{"name": "Gender", "values": [{"label": "Female", "weight": 1.0}]}]}}"#;
    let c = StudyConfig::from_json(minimal).unwrap();
    assert_eq!((c.parallelism, c.step_budget, c.screenshot_mode), (4, 50, false));
    assert_eq!(c.example_persona.resolve().unwrap(), uxsim_core::Persona::example());
    let structured = serde_json::json!({
        "url": "http://shop.test/", "n_participants": 1,
        "demographic_spec": {"fields": [{"name": "Gender", "values": [{"label": "Female", "weight": 1.0}]}]},
        "example_persona": uxsim_core::Persona::example(),
    });
    assert!(StudyConfig::from_json(&structured.to_string()).is_ok());
}

#[test]
fn trace_records_keep_their_three_fields() {
    let t: TraceRecord = serde_json::from_str(r#"{"action":"click","target":"add_to_cart2","description":"Adding it"}"#).unwrap();
    assert_eq!(t.target.as_deref(), Some("add_to_cart2"));
    assert!(serde_json::from_str::<TraceRecord>(r#"{"action":"click","description":"x","extra":1}"#).is_err());
}

#[tokio::test]
async fn twenty_participant_export_matches_golden() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let (_d, store) = temp_store();
    let r = runner(store, gateways(|_| shop_session(Duration::ZERO)), headless());
    let run = r.run_study(study_config(&shop.url("/"), 20)).await.unwrap();
    let (path, csv) = r.export(&run.run_id, uxsim_study::ExportFormat::Csv).unwrap();
    assert_eq!(std::fs::read(path).unwrap(), csv);
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_n20.csv");
    if std::env::var_os("UXSIM_BLESS").is_some() {
        std::fs::write(&golden, &csv).unwrap();
    }
    assert_eq!(String::from_utf8(csv).unwrap(), std::fs::read_to_string(golden).unwrap());
}
