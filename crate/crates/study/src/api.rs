//! JSON HTTP API over a [`StudyRunner`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use uxsim_core::{MemoryKind, SourceModule, StepRecord};

use crate::aggregate::{aggregate, Aggregates};
use crate::config::StudyConfig;
use crate::export::ExportFormat;
use crate::record::{RunSummary, SessionRecord, StudyRun};
use crate::runner::StudyRunner;
use crate::StudyError;

type AppState = Arc<StudyRunner>;

struct ApiError(StatusCode, String);

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let status = match &e {
            StudyError::UnknownRun(_) | StudyError::UnknownAgent(_) => StatusCode::NOT_FOUND,
            StudyError::Config(_) | StudyError::TimestampOutOfRange { .. } | StudyError::InvalidQuestion(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn unprocessable(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
}

/// Runs blocking store reads off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StudyError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

/// Routes under `/api`; `static_dir`, when given, is served for every other path.
pub fn router(runner: Arc<StudyRunner>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/agents/{aid}", get(get_agent))
        .route("/api/runs/{id}/agents/{aid}/interview", post(post_interview))
        .route("/api/runs/{id}/export", get(export))
        .route("/api/studies", post(post_study))
        .route("/api/screenshots/{*reference}", get(screenshot))
        .with_state(runner);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(runner: Arc<StudyRunner>, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(runner, static_dir)).await
}

async fn list_runs(State(r): State<AppState>) -> ApiResult<Json<Vec<RunSummary>>> {
    let out = blocking(move || {
        let store = r.store();
        Ok(store
            .list_runs()?
            .iter()
            .filter_map(|id| match store.load_run(id) {
                Ok(run) => Some(RunSummary::from(&run)),
                Err(e) => {
                    tracing::warn!(run = %id, error = %e, "unreadable run skipped");
                    None
                }
            })
            .collect())
    })
    .await?;
    Ok(Json(out))
}

#[derive(Serialize)]
struct RunDetail {
    #[serde(flatten)]
    run: StudyRun,
    aggregates: Aggregates,
}

async fn get_run(State(r): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunDetail>> {
    let run = blocking(move || r.store().load_run(&id)).await?;
    let aggregates = aggregate(&run);
    Ok(Json(RunDetail { run, aggregates }))
}

/// A memory without its embedding.
#[derive(Serialize)]
struct ReasoningEntry {
    id: u64,
    kind: MemoryKind,
    source_module: SourceModule,
    timestamp: u64,
    content: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    importance: Option<f64>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    metadata: serde_json::Map<String, Value>,
}

#[derive(Serialize)]
struct AgentDetail {
    session: SessionRecord,
    steps: Vec<StepRecord>,
    reasoning: Vec<ReasoningEntry>,
    live: bool,
}

async fn get_agent(State(r): State<AppState>, Path((id, aid)): Path<(String, String)>) -> ApiResult<Json<AgentDetail>> {
    let live = r.live_agent(&id, &aid).is_some();
    let (session, steps, stream) = blocking(move || {
        let store = r.store();
        let session = store.read_session(&id, &aid)?;
        Ok((session, store.read_steps(&id, &aid)?, store.read_memory(&id, &aid)?))
    })
    .await?;
    let reasoning = stream
        .pieces()
        .into_iter()
        .map(|p| ReasoningEntry {
            id: p.id,
            kind: p.kind,
            source_module: p.source_module,
            timestamp: p.timestamp,
            content: p.content,
            importance: p.importance,
            metadata: p.metadata.into_iter().collect(),
        })
        .collect();
    Ok(Json(AgentDetail { session, steps, reasoning, live }))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(r): State<AppState>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let format: ExportFormat = q.format.as_deref().unwrap_or("csv").parse().map_err(unprocessable)?;
    let name = format!("{id}.{}", format.extension());
    let (_, bytes) = blocking(move || r.export(&id, format)).await?;
    Ok((
        [(CONTENT_TYPE, format.content_type().to_string()), (CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\""))],
        bytes,
    )
        .into_response())
}

async fn post_study(State(r): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let config: StudyConfig = serde_json::from_slice(&body).map_err(unprocessable)?;
    let run_id = r.launch(config)?;
    Ok((StatusCode::CREATED, Json(json!({ "run_id": run_id }))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterviewBody {
    question: String,
    #[serde(default)]
    at_timestamp: Option<u64>,
}

async fn post_interview(
    State(r): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<crate::runner::InterviewOutcome>> {
    let body: InterviewBody = serde_json::from_slice(&body).map_err(unprocessable)?;
    Ok(Json(r.interview(&id, &aid, &body.question, body.at_timestamp).await?))
}

async fn screenshot(State(r): State<AppState>, Path(reference): Path<String>) -> ApiResult<Response> {
    let missing = || ApiError(StatusCode::NOT_FOUND, format!("no screenshot {reference:?}"));
    let path = r.store().screenshot_path(&reference).ok_or_else(missing)?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| missing())?;
    Ok(([(CONTENT_TYPE, "image/png")], bytes).into_response())
}
