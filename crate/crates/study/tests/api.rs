mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use serde_json::{json, Value};
use tower::ServiceExt;
use uxsim_study::{router, ExportFormat, RunStore, StudyRunner};

struct Fixture {
    _dir: tempfile::TempDir,
    _shop: uxsim_fixture_shop::RunningShop,
    shop_url: String,
    runner: Arc<StudyRunner>,
    run_id: String,
}

async fn fixture(screenshots: bool) -> Fixture {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let runner = Arc::new(runner(store, gateways(|_| shop_session(Duration::ZERO)), headless()));
    let mut cfg = study_config(&shop.url("/"), 2);
    cfg.screenshot_mode = screenshots;
    let run = runner.run_study(cfg).await.unwrap();
    Fixture { _dir: dir, shop_url: shop.url("/"), _shop: shop, runner, run_id: run.run_id }
}

fn app(f: &Fixture) -> Router {
    router(f.runner.clone(), None)
}

async fn call(app: Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>, Option<String>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let ctype = res.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, bytes, ctype)
}

async fn get_json(app: Router, uri: &str) -> (StatusCode, Value) {
    let (s, b, _) = call(app, "GET", uri, None).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn empty_store_lists_no_runs() {
    let dir = tempfile::tempdir().unwrap();
    let r = Arc::new(StudyRunner::new(RunStore::open(dir.path()).unwrap(), gateways(|_| shop_session(Duration::ZERO)), headless()));
    let (s, v) = get_json(router(r, None), "/api/runs").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!([]));
}

#[tokio::test]
async fn run_listing_and_detail() {
    let f = fixture(false).await;
    let (s, v) = get_json(app(&f), "/api/runs").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["run_id"], f.run_id);
    assert_eq!(v[0]["status"], "completed");
    assert_eq!(v[0]["sessions_finished"], 2);

    let (s, v) = get_json(app(&f), &format!("/api/runs/{}", f.run_id)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["sessions"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["url"], f.shop_url);
    let trace = f.runner.store().read_trace(&f.run_id, "1").unwrap();
    assert_eq!(v["sessions"][0]["action_trace"], serde_json::to_value(&trace).unwrap());
    assert_eq!(v["aggregates"]["rows"][0]["total_actions"], 7);
    assert_eq!(v["aggregates"]["overall"]["sus_score"]["mean"], 75.0);

    let (s, v) = get_json(app(&f), "/api/runs/missing").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("missing"));
}

#[tokio::test]
async fn agent_detail_has_reasoning_without_embeddings() {
    let f = fixture(false).await;
    let (s, v) = get_json(app(&f), &format!("/api/runs/{}/agents/1", f.run_id)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["live"], false);
    assert_eq!(v["steps"].as_array().unwrap().len(), 7);
    let reasoning = v["reasoning"].as_array().unwrap();
    assert!(!reasoning.is_empty());
    assert!(reasoning.iter().all(|m| m.get("embedding").is_none() && m["content"].is_string()));
    assert_eq!(v["session"]["agent_id"], "1");
    let (s, _) = get_json(app(&f), &format!("/api/runs/{}/agents/77", f.run_id)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_formats() {
    let f = fixture(false).await;
    let uri = |q: &str| format!("/api/runs/{}/export{q}", f.run_id);
    let (s, csv, ctype) = call(app(&f), "GET", &uri(""), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some(ExportFormat::Csv.content_type()));
    let rows = uxsim_study::import_rows(&csv, ExportFormat::Csv).unwrap();
    assert_eq!(rows, f.runner.aggregates(&f.run_id).unwrap().rows);

    let (s, xlsx, ctype) = call(app(&f), "GET", &uri("?format=xlsx"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some(ExportFormat::Xlsx.content_type()));
    assert_eq!(uxsim_study::import_rows(&xlsx, ExportFormat::Xlsx).unwrap(), rows);
    assert!(f.runner.store().run_dir(&f.run_id).unwrap().join("exports/aggregates.xlsx").is_file());

    let (s, _, _) = call(app(&f), "GET", &uri("?format=jsonl"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _, _) = call(app(&f), "GET", &uri("?format=pdf"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _, _) = call(app(&f), "GET", "/api/runs/nope/export", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn interview_endpoint() {
    let f = fixture(false).await;
    let uri = format!("/api/runs/{}/agents/2/interview", f.run_id);
    let post = |body: Value| call(app(&f), "POST", &uri, Some(body.to_string()));

    let (s, b, _) = post(json!({"question": "Which filter did you use?", "at_timestamp": 0})).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["question"], "Which filter did you use?");
    assert!(v["answer"].as_str().unwrap().contains("filters helped"));
    assert_eq!(v["context"], json!([]));

    let (s, b, _) = post(json!({"question": "Which filter did you use?"})).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert!(!v["context"].as_array().unwrap().is_empty());

    for bad in [json!({"question": ""}), json!({"question": "x", "at_timestamp": 1_000_000}), json!({"q": "x"}), json!({"question": 3})] {
        let (s, _, _) = post(bad.clone()).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    let (s, _, _) = call(app(&f), "POST", &format!("/api/runs/{}/agents/9/interview", f.run_id), Some(json!({"question": "x"}).to_string())).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = call(app(&f), "POST", "/api/runs/zzz/agents/1/interview", Some(json!({"question": "x"}).to_string())).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let session = f.runner.store().read_session(&f.run_id, "2").unwrap();
    assert_eq!(session.interviews.len(), 3);
}

#[tokio::test]
async fn studies_can_be_launched_over_http() {
    let f = fixture(false).await;
    let (s, _, _) = call(app(&f), "POST", "/api/studies", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let mut bad = study_config(&f.shop_url, 1);
    bad.n_participants = 0;
    let (s, _, _) = call(app(&f), "POST", "/api/studies", Some(serde_json::to_string(&bad).unwrap())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let cfg = study_config(&f.shop_url, 1);
    let (s, b, _) = call(app(&f), "POST", "/api/studies", Some(serde_json::to_string(&cfg).unwrap())).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = serde_json::from_slice::<Value>(&b).unwrap()["run_id"].as_str().unwrap().to_string();
    let deadline = std::time::Instant::now() + Duration::from_secs(30);
    loop {
        let (_, v) = get_json(app(&f), &format!("/api/runs/{id}")).await;
        if v["status"] == "completed" {
            assert_eq!(v["sessions"][0]["status"], "terminated");
            break;
        }
        assert!(std::time::Instant::now() < deadline, "run never finished: {v}");
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    let (_, v) = get_json(app(&f), "/api/runs").await;
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn screenshots_are_served() {
    let f = fixture(true).await;
    let session = f.runner.store().read_session(&f.run_id, "1").unwrap();
    let reference = &session.screenshots[0].reference;
    let (s, png, ctype) = call(app(&f), "GET", &format!("/api/screenshots/{reference}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("image/png"));
    assert_eq!(&png[..4], b"\x89PNG");
    let (s, _, _) = call(app(&f), "GET", &format!("/api/screenshots/{}/1/step_999.png", f.run_id), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = call(app(&f), "GET", "/api/screenshots/x/..%2F..%2Fetc/passwd.png", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_files_are_served_beside_the_api() {
    let f = fixture(false).await;
    let site = tempfile::tempdir().unwrap();
    std::fs::write(site.path().join("index.html"), "<h1>viewer</h1>").unwrap();
    let app = router(f.runner.clone(), Some(site.path().to_path_buf()));
    let (s, b, _) = call(app.clone(), "GET", "/index.html", None).await;
    assert_eq!((s, b.as_slice()), (StatusCode::OK, &b"<h1>viewer</h1>"[..]));
    let (s, _) = get_json(app, "/api/runs").await;
    assert_eq!(s, StatusCode::OK);
}
