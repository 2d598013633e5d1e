//! HTTP interface for interactive sessions.
//!
//! All mutations go through one exclusive writer. Status, the next query,
//! the hierarchy and overlays are served from a snapshot that is refreshed
//! after every mutation, so reads stay available while `iterate` runs.

use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tower_http::services::ServeDir;

use psyseg_core::imaging::{encode_png, extract_patch, SuperpixelMap};
use psyseg_core::viz::overlay_file_name;
use psyseg_core::session::{AnnotatorMode, PendingQuery, Recorded, Status, HIERARCHY_FILE};
use psyseg_core::{Error, Image, ResponseSource, Session};

/// Color of the patch outline drawn into context images.
pub const OUTLINE: [u8; 3] = [255, 230, 0];

const PLACEHOLDER_PAGE: &str = "<!doctype html><title>psyseg</title>\
<p>Annotation service running. Serve a UI bundle with <code>--static-dir</code>.</p>";

struct Snapshot {
    status: Status,
    next: Option<PendingQuery>,
}

impl Snapshot {
    fn of(session: &Session) -> Self {
        Snapshot { status: session.status(), next: session.next_query().cloned() }
    }
}

pub struct AppState {
    id: String,
    dir: PathBuf,
    image: Image,
    map: SuperpixelMap,
    context_scale: f64,
    writer: Arc<Mutex<Session>>,
    snapshot: RwLock<Snapshot>,
}

impl AppState {
    /// Wraps an interactive session; its id is the session directory name.
    pub fn new(session: Session) -> psyseg_core::Result<Self> {
        if !matches!(session.config().annotator, AnnotatorMode::Interactive) {
            return Err(Error::State("only interactive sessions can be served".into()));
        }
        let dir = session.dir().to_path_buf();
        Ok(AppState {
            id: session_id(&dir),
            image: session.image().clone(),
            map: session.superpixels().clone(),
            context_scale: session.config().context_scale,
            snapshot: RwLock::new(Snapshot::of(&session)),
            writer: Arc::new(Mutex::new(session)),
            dir,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

pub fn session_id(dir: &FsPath) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "session".into())
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::QuotaNotReached { .. } | Error::State(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn check_id(state: &AppState, id: &str) -> ApiResult<()> {
    if id != state.id {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("not found: session {id}")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OptionView {
    pub patch_id: usize,
    pub crop_png_b64: String,
    pub context_png_b64: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueryView {
    pub query_id: String,
    pub options: Vec<OptionView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseBody {
    pub query_id: String,
    pub choice: usize,
}

async fn status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Status>> {
    check_id(&state, &id)?;
    Ok(Json(state.snapshot.read().await.status.clone()))
}

async fn next_query(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    check_id(&state, &id)?;
    let Some(pending) = state.snapshot.read().await.next.clone() else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let mut options = Vec::with_capacity(3);
    for patch in pending.query.patches() {
        let view = extract_patch(&state.image, &state.map, patch, state.context_scale)?;
        options.push(OptionView {
            patch_id: patch,
            crop_png_b64: STANDARD.encode(encode_png(&view.crop)?),
            context_png_b64: STANDARD.encode(encode_png(&view.outlined_context(OUTLINE))?),
        });
    }
    Ok(Json(QueryView { query_id: pending.query_id, options }).into_response())
}

async fn respond(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ResponseBody>, JsonRejection>,
) -> ApiResult<Response> {
    check_id(&state, &id)?;
    let Json(body) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let mut session = state.writer.lock().await;
    let recorded = session.record_response(&body.query_id, body.choice, ResponseSource::Human)?;
    *state.snapshot.write().await = Snapshot::of(&session);
    let code = match recorded {
        Recorded::Created => StatusCode::CREATED,
        Recorded::Duplicate => StatusCode::OK,
    };
    Ok((code, Json(json!({ "query_id": body.query_id, "status": session.status() }))).into_response())
}

async fn iterate(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    check_id(&state, &id)?;
    let task_state = state.clone();
    let summary = tokio::task::spawn_blocking(move || {
        let mut session = task_state.writer.blocking_lock();
        let summary = session.close_iteration();
        *task_state.snapshot.blocking_write() = Snapshot::of(&session);
        summary
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(summary).into_response())
}

async fn hierarchy(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    check_id(&state, &id)?;
    match tokio::fs::read(state.dir.join(HIERARCHY_FILE)).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        Err(_) => Err(ApiError(StatusCode::NOT_FOUND, "not found: no hierarchy yet".into())),
    }
}

async fn segmentation(
    State(state): State<Arc<AppState>>,
    Path((id, file)): Path<(String, String)>,
) -> ApiResult<Response> {
    check_id(&state, &id)?;
    let level: usize = file
        .strip_suffix(".png")
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("not found: {file}")))?;
    match tokio::fs::read(state.dir.join(overlay_file_name(level))).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
        Err(_) => Err(ApiError(StatusCode::NOT_FOUND, format!("not found: no overlay for level {level}"))),
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&FsPath>) -> Router {
    let api = Router::new()
        .route("/api/sessions/{id}", get(status))
        .route("/api/sessions/{id}/queries/next", get(next_query))
        .route("/api/sessions/{id}/responses", post(respond))
        .route("/api/sessions/{id}/iterate", post(iterate))
        .route("/api/sessions/{id}/hierarchy", get(hierarchy))
        .route("/api/sessions/{id}/segmentation/{file}", get(segmentation))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(session: Session, addr: &str, static_dir: Option<PathBuf>) -> psyseg_core::Result<()> {
    let state = Arc::new(AppState::new(session)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving session {} on http://{}", state.id(), listener.local_addr()?);
    axum::serve(listener, router(state, static_dir.as_deref())).await?;
    Ok(())
}
