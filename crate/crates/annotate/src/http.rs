//! HTTP front end of the annotation store.
//!
//! Request and response bodies are JSON records; `/export` returns the
//! canonical annotation TSV. Every API route requires the shared project
//! token when one is configured. Anything else is served from the UI bundle.

use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode, Uri};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use faitheval_core::{PairKey, Task};
use serde::{Deserialize, Serialize};

use crate::store::{ExportOptions, SpanInput, Store, StoreError, TaskStatus};

pub const TOKEN_HEADER: &str = "x-project-token";
pub const INCOMPLETE_HEADER: &str = "x-incomplete-tasks";

const INDEX_HTML: &str = include_str!("index.html");

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub token: Option<String>,
    /// Directory of the annotation UI bundle.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

struct ApiError(StoreError);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError(e)
    }
}

fn error_kind(e: &StoreError) -> (StatusCode, &'static str) {
    use faitheval_core::CorpusError as C;
    match e {
        StoreError::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project"),
        StoreError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
        StoreError::UnknownPair(_) => (StatusCode::NOT_FOUND, "unknown_pair"),
        StoreError::FilterViolation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "filter_violation"),
        StoreError::PairInOtherProject { .. } => (StatusCode::CONFLICT, "pair_in_other_project"),
        StoreError::NotAssigned { .. } => (StatusCode::FORBIDDEN, "not_assigned"),
        StoreError::WrongTaskType { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_task_type"),
        StoreError::AlreadySubmitted { .. } => (StatusCode::CONFLICT, "already_submitted"),
        StoreError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        StoreError::ExportConflict { .. } => (StatusCode::CONFLICT, "export_conflict"),
        StoreError::Corpus(C::IllegalLabel { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "illegal_label"),
        StoreError::Corpus(C::OverlappingSpans { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "overlapping_spans"),
        StoreError::Corpus(C::SpanOutOfRange { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "span_out_of_range"),
        StoreError::Corpus(C::SpanCoversNoWord { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "span_covers_no_word"),
        StoreError::Corpus(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_annotation"),
        StoreError::Io { .. } | StoreError::CorruptLog { .. } | StoreError::CorruptSnapshot(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "storage")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = error_kind(&self.0);
        let body = ErrorBody {
            error,
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a blocking store call off the async executor.
async fn blocking<T: Send + 'static>(
    store: &Arc<Store>,
    f: impl FnOnce(&Store) -> Result<T, StoreError> + Send + 'static,
) -> ApiResult<T> {
    let store = Arc::clone(store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .expect("store task panicked")
        .map_err(ApiError)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateProject {
    pub name: String,
    #[serde(default)]
    pub pilot: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectCreated {
    pub name: String,
    pub pilot: bool,
}

async fn create_project(State(st): State<AppState>, Json(req): Json<CreateProject>) -> ApiResult<Response> {
    let name = req.name.clone();
    let info = blocking(&st.store, move |s| s.create_project(&req.name, req.pilot)).await?;
    Ok((
        StatusCode::CREATED,
        Json(ProjectCreated {
            name,
            pilot: info.pilot,
        }),
    )
        .into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateBatch {
    pub task_type: Task,
    pub pairs: Vec<PairKey>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchCreated {
    pub task_ids: Vec<String>,
}

async fn create_batch(
    State(st): State<AppState>,
    Path(project): Path<String>,
    Json(req): Json<CreateBatch>,
) -> ApiResult<Json<BatchCreated>> {
    let task_ids = blocking(&st.store, move |s| s.create_batch(&project, &req.pairs, req.task_type)).await?;
    Ok(Json(BatchCreated { task_ids }))
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: String,
    #[serde(rename = "type")]
    task_type: Task,
    project: Option<String>,
}

async fn next_task(State(st): State<AppState>, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    let view = blocking(&st.store, move |s| s.next_task(&q.annotator, q.task_type, q.project.as_deref())).await?;
    Ok(match view {
        Some(v) => Json(v).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitSpans {
    pub annotator_id: String,
    #[serde(default)]
    pub spans: Vec<SpanInput>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitVerdict {
    pub annotator_id: String,
    pub verdict: bool,
    #[serde(default)]
    pub evidence_note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub task_id: String,
    pub status: TaskStatus,
}

async fn submit_spans(
    State(st): State<AppState>,
    Path(task_id): Path<String>,
    Json(req): Json<SubmitSpans>,
) -> ApiResult<Json<Ack>> {
    let id = task_id.clone();
    let status = blocking(&st.store, move |s| s.submit_spans(&id, &req.annotator_id, &req.spans)).await?;
    Ok(Json(Ack { task_id, status }))
}

async fn submit_verdict(
    State(st): State<AppState>,
    Path(task_id): Path<String>,
    Json(req): Json<SubmitVerdict>,
) -> ApiResult<Json<Ack>> {
    let id = task_id.clone();
    let status = blocking(&st.store, move |s| {
        s.submit_verdict(&id, &req.annotator_id, req.verdict, req.evidence_note)
    })
    .await?;
    Ok(Json(Ack { task_id, status }))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(rename = "type")]
    task_type: Option<Task>,
    project: Option<String>,
    #[serde(default)]
    include_pilot: bool,
}

async fn export(State(st): State<AppState>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let options = ExportOptions {
        task_type: q.task_type,
        project: q.project,
        include_pilot: q.include_pilot,
    };
    let out = blocking(&st.store, move |s| s.export(&options)).await?;
    let mut resp = out.tsv.into_response();
    let headers = resp.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("text/tab-separated-values; charset=utf-8"),
    );
    headers.insert(INCOMPLETE_HEADER, HeaderValue::from(out.incomplete_tasks));
    Ok(resp)
}

async fn compact(State(st): State<AppState>) -> ApiResult<StatusCode> {
    blocking(&st.store, |s| s.compact()).await?;
    Ok(StatusCode::NO_CONTENT)
}

fn presented_token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get(TOKEN_HEADER) {
        return v.to_str().ok();
    }
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
}

async fn require_token(State(st): State<AppState>, req: Request, next: Next) -> Response {
    match &st.token {
        Some(expected) if presented_token(req.headers()) != Some(expected.as_str()) => (
            StatusCode::UNAUTHORIZED,
            Json(ErrorBody {
                error: "unauthorized",
                message: "missing or wrong project token".into(),
            }),
        )
            .into_response(),
        _ => next.run(req).await,
    }
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Relative file path under the bundle root, or `None` for paths that try to
/// leave it.
fn bundle_path(uri_path: &str) -> Option<PathBuf> {
    let trimmed = uri_path.trim_start_matches('/');
    let rel = if trimmed.is_empty() || trimmed.ends_with('/') {
        PathBuf::from(trimmed).join("index.html")
    } else {
        PathBuf::from(trimmed)
    };
    rel.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then_some(rel)
}

async fn static_file(State(st): State<AppState>, uri: Uri) -> Response {
    let Some(rel) = bundle_path(uri.path()) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    if let Some(dir) = &st.ui_dir {
        let full = dir.join(&rel);
        if let Ok(bytes) = tokio::fs::read(&full).await {
            return ([(header::CONTENT_TYPE, content_type(&full))], Body::from(bytes)).into_response();
        }
    }
    if rel == FsPath::new("index.html") {
        return ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], INDEX_HTML).into_response();
    }
    StatusCode::NOT_FOUND.into_response()
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{project}/batches", post(create_batch))
        .route("/tasks/next", get(next_task))
        .route("/tasks/{task_id}/spans", post(submit_spans))
        .route("/tasks/{task_id}/verdict", post(submit_verdict))
        .route("/export", get(export))
        .route("/admin/compact", post(compact))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    api.fallback(static_file).with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
