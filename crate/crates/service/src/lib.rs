//! HTTP/JSON front end: trace upload and retrieval, exposure profiles,
//! field queries and commute optimization, over a file-backed store.
//!
//! Every response body is produced by the same `dosewise_core` functions the
//! CLI uses, so outputs of the two interfaces are interchangeable.

mod config;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;
use uuid::Uuid;

pub use config::{Config, ConfigError, DATA_DIR_ENV, PORT_ENV};
pub use store::{Store, StoredTrace};

use dosewise_core::dose::{self, DoseModelParams, EeSource};
use dosewise_core::minimizer::evaluation_count;
use dosewise_core::report::{profile_json, run_optimization, OptimizationReport};
use dosewise_core::scenario::{load_field_path, load_scenario, AssetResolver, ScenarioDoc, ScenarioError, SearchMode};
use dosewise_core::trace::{parse_records, ParseOptions, ProfileOptions, Subject, Trace, TraceError};
use dosewise_core::{Error as CoreError, ErrorKind, LatLon};

/// Error response: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    detail: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into(), detail: None }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e.kind() {
            ErrorKind::MissingAsset => Self::new(StatusCode::CONFLICT, "missing_asset", e.to_string()),
            ErrorKind::Validation => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", e.to_string()),
            ErrorKind::Runtime => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "runtime", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "kind": self.kind, "message": self.message });
        if let Some(d) = self.detail {
            body["detail"] = d;
        }
        (self.status, axum::Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Resolves asset names inside the assets directory only.
#[derive(Debug, Clone)]
pub struct SandboxedAssets(pub PathBuf);

impl AssetResolver for SandboxedAssets {
    fn resolve(&self, name: &str) -> Result<PathBuf, ScenarioError> {
        let rel = FsPath::new(name);
        if name.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ScenarioError::Invalid(format!("asset name {name:?} must be a relative path without '..'")));
        }
        let full = self.0.join(rel);
        if full.is_file() {
            Ok(full)
        } else {
            Err(ScenarioError::MissingAsset { name: name.into(), message: "not found in the assets directory".into() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

struct Job {
    status: JobStatus,
    evaluation_count: usize,
    progress: Arc<AtomicUsize>,
    error: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<Config>,
    store: Store,
    assets: SandboxedAssets,
    jobs: Arc<Mutex<HashMap<Uuid, Job>>>,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(config: Config) -> std::io::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        let assets = SandboxedAssets(config.assets_dir());
        let workers = Arc::new(Semaphore::new(config.workers));
        Ok(Self { config: Arc::new(config), store, assets, jobs: Arc::default(), workers })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/traces", post(upload_trace))
        .route("/traces/{id}", get(get_trace))
        .route("/traces/{id}/profile", get(trace_profile))
        .route("/fields/{name}/concentration", get(field_concentration))
        .route("/optimize", post(optimize))
        .route("/jobs/{id}", get(get_job))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Binds, reports the bound address through `ready`, and serves forever.
pub async fn serve(config: Config, ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let addr = format!("{}:{}", config.host, config.port);
    let state = AppState::new(config)?;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn json_bytes(status: StatusCode, bytes: impl Into<axum::body::Body>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes.into()).into_response()
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    owner: Option<String>,
    /// Calendar date for traces whose time column is HH:MM[:SS].
    date: Option<chrono::NaiveDate>,
}

fn trace_error_response(e: TraceError) -> ApiError {
    let detail = match &e {
        TraceError::Row { row, line, message } => Some(json!({ "row": row, "line": line, "message": message })),
        TraceError::NonMonotonic { row, timestamp } => Some(json!({ "row": row, "timestamp": timestamp })),
        TraceError::MissingColumn(c) | TraceError::UnknownColumn(c) => Some(json!({ "column": c })),
        _ => None,
    };
    ApiError { detail, ..ApiError::new(StatusCode::BAD_REQUEST, "parse", e.to_string()) }
}

async fn upload_trace(State(st): State<AppState>, Query(q): Query<UploadQuery>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse", format!("body is not UTF-8: {e}")))?;
    let records = parse_records::<f64>(text, &ParseOptions { date: q.date }).map_err(trace_error_response)?;
    let owner = q
        .owner
        .or_else(|| headers.get("x-owner").and_then(|v| v.to_str().ok()).map(str::to_owned))
        .unwrap_or_else(|| "anonymous".into());
    let store = st.store.clone();
    let stored = tokio::task::spawn_blocking(move || store.put_trace(&owner, records))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, axum::Json(json!({ "trace_id": stored.trace_id }))).into_response())
}

async fn get_trace(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    match st.store.trace_bytes(&id).map_err(ApiError::internal)? {
        Some(bytes) => Ok(json_bytes(StatusCode::OK, bytes)),
        None => Err(ApiError::not_found(format!("trace {id}"))),
    }
}

#[derive(Debug, Deserialize)]
struct ProfileQuery {
    field: String,
    subject: String,
    #[serde(default)]
    source: EeSource,
    radius_m: Option<f64>,
    /// Dose parameter file; the bundled defaults otherwise.
    params: Option<String>,
}

async fn trace_profile(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ProfileQuery>) -> ApiResult<Response> {
    let stored = st.store.get_trace(&id).map_err(ApiError::internal)?.ok_or_else(|| ApiError::not_found(format!("trace {id}")))?;
    let subject_path = st.assets.resolve(&q.subject).map_err(CoreError::from)?;
    let subject = Subject::<f64>::load(&subject_path).map_err(CoreError::from)?;
    let field_path = st.assets.resolve(&q.field).map_err(CoreError::from)?;
    let params = match &q.params {
        Some(name) => DoseModelParams::load(&st.assets.resolve(name).map_err(CoreError::from)?).map_err(CoreError::from)?,
        None => DoseModelParams::fixture(),
    };
    let trace = Trace::new(subject, stored.records).map_err(CoreError::from)?;
    let mut opts = ProfileOptions::default();
    if let Some(r) = q.radius_m {
        if !(r.is_finite() && r > 0.0) {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "radius_m must be > 0"));
        }
        opts.radius_m = r;
    }
    let body = tokio::task::spawn_blocking(move || -> Result<String, CoreError> {
        let field = load_field_path::<f64>(&field_path)?;
        Ok(profile_json(&trace, field.as_ref(), &params, q.source, &opts)?)
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(json_bytes(StatusCode::OK, body))
}

#[derive(Debug, Deserialize)]
struct ConcentrationQuery {
    lat: f64,
    lon: f64,
    time: NaiveDateTime,
}

async fn field_concentration(State(st): State<AppState>, Path(name): Path<String>, Query(q): Query<ConcentrationQuery>) -> ApiResult<Response> {
    let path = st.assets.resolve(&name).map_err(CoreError::from)?;
    let field = load_field_path::<f64>(&path).map_err(CoreError::from)?;
    let ppm = field.concentration_at(LatLon::new(q.lat, q.lon), q.time).map_err(CoreError::from)?;
    let ug = dose::ppm_to_ug_per_liter(ppm, &DoseModelParams::<f64>::fixture().conversion).map_err(CoreError::from)?;
    Ok(axum::Json(json!({ "lat": q.lat, "lon": q.lon, "time": q.time, "ppm": ppm, "ug_per_l": ug })).into_response())
}

#[derive(Debug, Deserialize)]
struct OptimizeQuery {
    mode: Option<SearchMode>,
    granularity: Option<u32>,
}

async fn optimize(State(st): State<AppState>, Query(q): Query<OptimizeQuery>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", format!("body is not UTF-8: {e}")))?;
    let doc = ScenarioDoc::<f64>::from_json(text).map_err(CoreError::from)?;
    let search = q.mode.unwrap_or(doc.search);
    let granularity = q.granularity.unwrap_or(doc.granularity_minutes);
    if granularity == 0 {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "granularity must be >= 1 minute"));
    }
    let assets = st.assets.clone();
    let loaded = tokio::task::spawn_blocking(move || -> Result<_, CoreError> {
        let loaded = load_scenario(&doc, &assets)?;
        let count = evaluation_count(&loaded.for_search(search).with_granularity(granularity))?;
        Ok((loaded, count))
    })
    .await
    .map_err(ApiError::internal)?;
    let (loaded, count) = loaded?;

    if count <= st.config.sync_evaluation_limit {
        let _permit = st.workers.clone().acquire_owned().await.map_err(ApiError::internal)?;
        let report = tokio::task::spawn_blocking(move || run_optimization(&loaded, search, granularity, None))
            .await
            .map_err(ApiError::internal)?
            .map_err(CoreError::from)?;
        return Ok(json_bytes(StatusCode::OK, report.to_json()));
    }

    let id = Uuid::new_v4();
    let progress = Arc::new(AtomicUsize::new(0));
    st.jobs.lock().expect("job table").insert(
        id,
        Job { status: JobStatus::Queued, evaluation_count: count, progress: progress.clone(), error: None },
    );
    let state = st.clone();
    tokio::spawn(async move {
        let Ok(_permit) = state.workers.clone().acquire_owned().await else { return };
        state.set_status(id, JobStatus::Running, None);
        let p = progress.clone();
        let outcome = tokio::task::spawn_blocking(move || run_optimization(&loaded, search, granularity, Some(&p))).await;
        match outcome {
            Ok(Ok(report)) => match state.store.put_job(id, job_document(id, count, &report).as_bytes()) {
                Ok(()) => state.set_status(id, JobStatus::Done, None),
                Err(e) => state.set_status(id, JobStatus::Failed, Some(e.to_string())),
            },
            Ok(Err(e)) => state.set_status(id, JobStatus::Failed, Some(e.to_string())),
            Err(e) => state.set_status(id, JobStatus::Failed, Some(e.to_string())),
        }
    });
    let body = json!({ "job_id": id.to_string(), "status_url": format!("/jobs/{id}"), "evaluation_count": count });
    Ok((StatusCode::ACCEPTED, axum::Json(body)).into_response())
}

/// Stored form of a finished job; `result` is the same report `/optimize`
/// returns synchronously.
fn job_document(id: Uuid, count: usize, report: &OptimizationReport<f64>) -> String {
    let doc = json!({
        "job_id": id.to_string(),
        "status": JobStatus::Done,
        "evaluation_count": count,
        "completed": count,
        "result": report,
    });
    serde_json::to_string_pretty(&doc).expect("job serializes")
}

impl AppState {
    fn set_status(&self, id: Uuid, status: JobStatus, error: Option<String>) {
        if let Some(job) = self.jobs.lock().expect("job table").get_mut(&id) {
            job.status = status;
            job.error = error;
        }
    }
}

async fn get_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let not_found = || ApiError::not_found(format!("job {id}"));
    let uuid = store::parse_id(&id).ok_or_else(not_found)?;
    let live = st.jobs.lock().expect("job table").get(&uuid).map(|j| (j.status, j.evaluation_count, j.progress.load(Ordering::Relaxed), j.error.clone()));
    match live {
        Some((JobStatus::Done, ..)) | None => match st.store.job_bytes(&id).map_err(ApiError::internal)? {
            Some(bytes) => Ok(json_bytes(StatusCode::OK, bytes)),
            None => Err(not_found()),
        },
        Some((status, total, done, error)) => {
            let mut body = json!({ "job_id": id, "status": status, "evaluation_count": total, "completed": done });
            if let Some(e) = error {
                body["error"] = json!(e);
            }
            Ok(axum::Json(body).into_response())
        }
    }
}
