//! HTTP front end for the blinded annotation queue.
//!
//! Annotator routes never expose trajectory ids, rewards, signals or sample
//! provenance. Export and report routes are gated by a shared admin token.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sigtriage_core::analysis::{compute_report, render_report, AnalysisError};
use sigtriage_core::annotation::{AnnotationError, AnnotationService, LabelSubmission};
use tower_http::services::ServeDir;

pub const ADMIN_TOKEN_ENV: &str = "TRIAGE_ADMIN_TOKEN";

pub struct AppState {
    service: Mutex<AnnotationService>,
    admin_token: Option<String>,
    alpha: f64,
}

impl AppState {
    /// `admin_token = None` disables the admin routes entirely.
    pub fn new(service: AnnotationService, admin_token: Option<String>) -> Self {
        AppState { service: Mutex::new(service), admin_token: admin_token.filter(|t| !t.is_empty()), alpha: 0.05 }
    }

    fn lock(&self) -> MutexGuard<'_, AnnotationService> {
        // A panic while holding the lock cannot leave the store half-written:
        // appends roll back on error, so the inner state is still usable.
        self.service.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        use AnnotationError::*;
        let (status, code) = match &e {
            UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "unknown_annotator"),
            UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
            NoSuchLabel { .. } => (StatusCode::NOT_FOUND, "no_such_label"),
            DuplicateLabel { .. } => (StatusCode::CONFLICT, "duplicate_label"),
            InvalidCategory { .. } => (StatusCode::BAD_REQUEST, "invalid_category"),
            NoteTooLong(_) => (StatusCode::BAD_REQUEST, "note_too_long"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, code, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// All API routes, plus the review UI bundle at `/` when a directory is given.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/queue/next", get(next_item))
        .route("/api/item/{blinded_id}", get(item))
        .route("/api/labels", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/api/report", get(report))
        .route("/api/labels/{annotator}/{blinded_id}", delete(delete_label))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serve `app` until `shutdown` resolves, letting in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

fn annotator(q: &AnnotatorQuery) -> Result<&str, ApiError> {
    q.annotator
        .as_deref()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing_annotator", "query parameter `annotator` is required"))
}

async fn next_item(State(s): State<Arc<AppState>>, Query(q): Query<AnnotatorQuery>) -> ApiResult<impl Serialize> {
    let a = annotator(&q)?;
    Ok(Json(s.lock().next_item(a)?))
}

async fn item(
    State(s): State<Arc<AppState>>,
    Path(blinded_id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().item(&blinded_id, q.annotator.as_deref().filter(|a| !a.is_empty()))?))
}

async fn progress(State(s): State<Arc<AppState>>, Query(q): Query<AnnotatorQuery>) -> ApiResult<impl Serialize> {
    let a = annotator(&q)?;
    Ok(Json(s.lock().progress(a)?))
}

async fn submit(
    State(s): State<Arc<AppState>>,
    body: Result<Json<LabelSubmission>, JsonRejection>,
) -> Result<(StatusCode, Json<impl Serialize>), ApiError> {
    let Json(sub) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text()))?;
    let ack = s.lock().submit(sub, chrono::Utc::now())?;
    Ok((StatusCode::CREATED, Json(ack)))
}

fn check_admin(s: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(expected) = &s.admin_token else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "admin_disabled", format!("set {ADMIN_TOKEN_ENV} to enable admin routes")));
    };
    let given = headers
        .get("x-admin-token")
        .and_then(|v| v.to_str().ok())
        .or_else(|| headers.get("authorization").and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer ")));
    match given {
        Some(g) if constant_time_eq(g.as_bytes(), expected.as_bytes()) => Ok(()),
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin token missing or wrong")),
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn export(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    check_admin(&s, &headers)?;
    let body = s.lock().export().to_jsonl();
    Ok(([("content-type", "application/x-ndjson")], body).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    check_admin(&s, &headers)?;
    let export = s.lock().export();
    let r = compute_report(&export, s.alpha).map_err(|e| match e {
        AnalysisError::Stats(_) => ApiError::new(StatusCode::CONFLICT, "report_unavailable", e.to_string()),
        _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "report_unavailable", e.to_string()),
    })?;
    Ok(match q.format.as_deref() {
        Some("text") => ([("content-type", "text/plain; charset=utf-8")], render_report(&r)).into_response(),
        _ => Json(r).into_response(),
    })
}

async fn delete_label(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((annotator, blinded_id)): Path<(String, String)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    check_admin(&s, &headers)?;
    let seq = s.lock().delete_label(&annotator, &blinded_id)?;
    Ok(Json(json!({"seq": seq, "deleted": true})))
}
