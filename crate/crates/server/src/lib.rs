//! HTTP/JSON API over an [`AttributionService`].
//!
//! Every response carries an `X-Schema-Version` header. Every non-2xx
//! response has an [`ApiError`] body. Attribution work runs on blocking
//! threads, bounded by a semaphore.

mod error;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use attributor_core::service::{
    AttributeOptions, AttributionService, PreprocessState, PreprocessStatus, TokenRow, SCHEMA_VERSION,
};
use attributor_core::Error as CoreError;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

pub use error::ApiError;

pub const DEFAULT_PORT: u16 = 8501;
pub const SCHEMA_HEADER: &str = "x-schema-version";
const PLACEHOLDER_INDEX: &str = include_str!("../static/index.html");

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Maximum number of attribution jobs running at once. 0 picks the
    /// number of available CPUs.
    pub max_jobs: usize,
    /// Directory holding a built web UI, served at `/`.
    pub static_dir: Option<PathBuf>,
}

pub struct AppState {
    service: Arc<AttributionService>,
    jobs: Semaphore,
    preprocessing: AtomicBool,
}

impl AppState {
    pub fn new(service: AttributionService, max_jobs: usize) -> Arc<Self> {
        let permits = if max_jobs == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            max_jobs
        };
        Arc::new(AppState {
            service: Arc::new(service),
            jobs: Semaphore::new(permits),
            preprocessing: AtomicBool::new(false),
        })
    }

    pub fn service(&self) -> &AttributionService {
        &self.service
    }

    /// Run `f` against the service on a blocking thread, holding a job permit.
    async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&AttributionService) -> attributor_core::Result<T> + Send + 'static,
    {
        let _permit = self.jobs.acquire().await.map_err(|_| ApiError::internal("worker pool closed"))?;
        let service = Arc::clone(&self.service);
        tokio::task::spawn_blocking(move || f(&service))
            .await
            .map_err(|e| ApiError::internal(&format!("worker failed: {e}")))?
            .map_err(ApiError::from)
    }

    fn ensure_idle(&self) -> Result<(), ApiError> {
        if self.preprocessing.load(Ordering::SeqCst) {
            return Err(CoreError::Busy("preprocessing in progress".into()).into());
        }
        Ok(())
    }
}

pub fn router(state: Arc<AppState>, options: &ServerOptions) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/tokens", get(session_tokens))
        .route("/api/sessions/{id}/attribute", post(attribute))
        .route("/api/sessions/{id}/compare", post(compare))
        .route("/api/datapoints/{id}", get(datapoint))
        .route("/api/status", get(status))
        .route("/api/preprocess", post(preprocess))
        .route("/api/{*rest}", axum::routing::any(api_not_found))
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    let app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })).fallback(api_not_found),
    };
    app.layer(middleware::map_response(schema_header))
}

/// Bind-independent entry point: serve `router` on an already bound listener.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>, options: &ServerOptions) -> std::io::Result<()> {
    axum::serve(listener, router(state, options)).await
}

async fn schema_header(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(SCHEMA_HEADER, HeaderValue::from(SCHEMA_VERSION));
    response
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "bad_request", "method not allowed")
}

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(&format!("invalid request body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionBody {
    #[serde(default)]
    prompt: String,
    generated_text: Option<String>,
    generated_tokens: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct SessionBody {
    session_id: String,
    prompt: String,
    tokens: Vec<TokenRow>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionBody = parse_body(&body)?;
    let session = state
        .run(move |s| s.create_session(&req.prompt, req.generated_text.as_deref(), req.generated_tokens))
        .await?;
    let body = SessionBody {
        session_id: session.session_id,
        prompt: session.prompt,
        tokens: session.tokens,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn session_tokens(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionBody>, ApiError> {
    let session = state.run(move |s| s.session(&id)).await?;
    Ok(Json(SessionBody {
        session_id: session.session_id,
        prompt: session.prompt,
        tokens: session.tokens,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeBody {
    token_indices: Option<Vec<usize>>,
    k_display: Option<usize>,
    method: Option<String>,
}

async fn attribute(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: AttributeBody = parse_body(&body)?;
    state.ensure_idle()?;
    let opts = AttributeOptions {
        k_display: req.k_display,
        method: req.method,
    };
    let result = state
        .run(move |s| s.attribute(&id, req.token_indices.as_deref(), &opts))
        .await?;
    Ok(Json(result).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareBody {
    edited_text: Option<String>,
    indices_generated: Option<Vec<usize>>,
    indices_edited: Option<Vec<usize>>,
    k_display: Option<usize>,
    method: Option<String>,
}

async fn compare(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: CompareBody = parse_body(&body)?;
    let edited = req
        .edited_text
        .ok_or_else(|| ApiError::bad_request("edited_text is required"))?;
    state.ensure_idle()?;
    let opts = AttributeOptions {
        k_display: req.k_display,
        method: req.method,
    };
    let result = state
        .run(move |s| {
            s.compare(
                &id,
                &edited,
                req.indices_generated.as_deref(),
                req.indices_edited.as_deref(),
                &opts,
            )
        })
        .await?;
    Ok(Json(result).into_response())
}

async fn datapoint(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let example_id: usize = id
        .parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "not_found", &format!("no data point {id:?}")))?;
    let point = state.run(move |s| s.get_datapoint(example_id)).await?;
    Ok(Json(point).into_response())
}

#[derive(Debug, Serialize)]
struct StatusBody {
    preprocess: PreprocessStatus,
}

async fn status(State(state): State<Arc<AppState>>) -> Json<StatusBody> {
    let mut preprocess = state.service.status();
    if state.preprocessing.load(Ordering::SeqCst) && preprocess.state == PreprocessState::Idle {
        preprocess.state = PreprocessState::Running;
    }
    Json(StatusBody { preprocess })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreprocessBody {
    #[serde(default)]
    force: bool,
}

/// Start preprocessing in the background. Progress is polled via
/// `/api/status`.
async fn preprocess(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: PreprocessBody = parse_body(&body)?;
    if state
        .preprocessing
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
        || state.service.status().state == PreprocessState::Running
    {
        return Err(CoreError::Busy("preprocessing already running".into()).into());
    }
    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        let _ = worker.service.preprocess(req.force);
        worker.preprocessing.store(false, Ordering::SeqCst);
    });
    let mut snapshot = state.service.status();
    snapshot.state = PreprocessState::Running;
    Ok((StatusCode::ACCEPTED, Json(StatusBody { preprocess: snapshot })).into_response())
}
