//! HTTP JSON API and server-push stream over [`SessionCore`].
//!
//! Each session has one loop task, the only writer in running mode.
//! Readers take the latest committed sample under a short lock, and stream
//! subscribers walk the sample log with their own cursor, so none of them
//! can miss a sample or see a half-applied step.

use std::collections::HashMap;
use std::convert::Infallible;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use super::{OperatorCommand, SessionCore, SessionError, SessionSample, SessionSpec, SessionStatus};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Directory for `session-<id>.jsonl` run logs.
    pub log_dir: Option<PathBuf>,
    pub max_sessions: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            log_dir: None,
            max_sessions: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Committed {
    len: usize,
    closed: bool,
}

struct Inner {
    core: SessionCore,
    written: usize,
}

struct SessionHandle {
    id: u64,
    inner: Mutex<Inner>,
    committed: watch::Sender<Committed>,
    log_path: Option<PathBuf>,
}

impl SessionHandle {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `n` steps, persists new samples and wakes subscribers.
    fn step(&self, n: u64) -> Result<(), SessionError> {
        let mut g = self.lock();
        let mut result = Ok(());
        for _ in 0..n {
            if let Err(e) = g.core.step() {
                result = Err(e);
                break;
            }
        }
        self.publish(&mut g);
        result
    }

    fn publish(&self, g: &mut Inner) {
        if let Some(path) = &self.log_path {
            let fresh = &g.core.log()[g.written..];
            if !fresh.is_empty() {
                let appended = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .and_then(|mut f| f.write_all(super::export_log(fresh).as_bytes()));
                if appended.is_ok() {
                    g.written = g.core.log().len();
                }
            }
        }
        let c = Committed {
            len: g.core.log().len(),
            closed: g.core.status() == SessionStatus::Stopped,
        };
        self.committed.send_replace(c);
    }

    fn info(&self) -> SessionInfo {
        let g = self.lock();
        SessionInfo {
            id: self.id.to_string(),
            status: g.core.status(),
            steps: g.core.steps(),
            spec: g.core.spec().clone(),
            snapshot: g.core.snapshot().clone(),
        }
    }
}

struct Registry {
    sessions: Mutex<HashMap<u64, Arc<SessionHandle>>>,
    next_id: AtomicU64,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState(Arc<Registry>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState(Arc::new(Registry {
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            config,
        }))
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<u64, Arc<SessionHandle>>> {
        self.0.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        id.parse::<u64>()
            .ok()
            .and_then(|n| self.sessions().get(&n).cloned())
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::Session(SessionError::Stopped) => StatusCode::CONFLICT,
            ApiError::Session(SessionError::ResourceLimit(_)) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Session(SessionError::Step(_) | SessionError::Lung(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Session(_) => StatusCode::BAD_REQUEST,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateRequest {
    #[serde(flatten)]
    pub spec: SessionSpec,
    /// Start the real-time loop right away; otherwise the session starts
    /// paused and advances only through the control endpoint.
    #[serde(default = "yes")]
    pub auto_run: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionInfo {
    pub id: String,
    pub status: SessionStatus,
    pub steps: u64,
    pub spec: SessionSpec,
    pub snapshot: SessionSample,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommandAck {
    pub accepted: bool,
    /// Index of the step that will consume the command.
    pub applies_at_step: u64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Control {
    Pause,
    Resume,
    Step {
        #[serde(default = "one")]
        count: u64,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    /// First step to deliver; defaults to 0 (the whole run).
    pub from: Option<u64>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/control", post(post_control))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves the API until the process is interrupted.
pub async fn serve(addr: std::net::SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(config))).await
}

async fn create_session(State(app): State<AppState>, Json(req): Json<CreateRequest>) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    if app.sessions().len() >= app.0.config.max_sessions {
        return Err(SessionError::ResourceLimit(format!("at most {} sessions", app.0.config.max_sessions)).into());
    }
    let mut core = SessionCore::new(req.spec)?;
    if !req.auto_run {
        core.set_status(SessionStatus::Paused);
    }
    let id = app.0.next_id.fetch_add(1, Ordering::Relaxed);
    let tick = core.spec().tick_ms;
    let (tx, _) = watch::channel(Committed { len: 0, closed: false });
    let handle = Arc::new(SessionHandle {
        id,
        inner: Mutex::new(Inner { core, written: 0 }),
        committed: tx,
        log_path: app.0.config.log_dir.as_ref().map(|d| d.join(format!("session-{id}.jsonl"))),
    });
    handle.publish(&mut handle.lock());
    app.sessions().insert(id, handle.clone());
    tokio::spawn(run_loop(handle.clone(), tick));
    Ok((StatusCode::CREATED, Json(handle.info())))
}

async fn run_loop(handle: Arc<SessionHandle>, tick_ms: u64) {
    let mut interval = tokio::time::interval(Duration::from_millis(tick_ms));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        interval.tick().await;
        let status = handle.lock().core.status();
        match status {
            SessionStatus::Stopped => break,
            SessionStatus::Paused => continue,
            SessionStatus::Running => {
                // A failed step stops the session; the error is in its status.
                let _ = handle.step(1);
            }
        }
    }
}

async fn session_info(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    Ok(Json(app.get(&id)?.info()))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let h = app.get(&id)?;
    app.sessions().remove(&h.id);
    {
        let mut g = h.lock();
        g.core.set_status(SessionStatus::Stopped);
        h.publish(&mut g);
    }
    Ok(Json(h.info()))
}

async fn post_command(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(cmd): Json<OperatorCommand>,
) -> Result<(StatusCode, Json<CommandAck>), ApiError> {
    let h = app.get(&id)?;
    let mut g = h.lock();
    g.core.apply_command(cmd)?;
    let ack = CommandAck {
        accepted: true,
        applies_at_step: g.core.steps() + 1,
    };
    Ok((StatusCode::ACCEPTED, Json(ack)))
}

async fn post_control(State(app): State<AppState>, Path(id): Path<String>, Json(c): Json<Control>) -> Result<Json<SessionInfo>, ApiError> {
    let h = app.get(&id)?;
    match c {
        Control::Pause => h.lock().core.set_status(SessionStatus::Paused),
        Control::Resume => h.lock().core.set_status(SessionStatus::Running),
        Control::Step { count } => {
            if count > 100_000 {
                return Err(SessionError::ResourceLimit("at most 100000 steps per request".into()).into());
            }
            h.step(count)?;
        }
    }
    Ok(Json(h.info()))
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSample>, ApiError> {
    let h = app.get(&id)?;
    let s = h.lock().core.snapshot().clone();
    Ok(Json(s))
}

async fn log(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let h = app.get(&id)?;
    let text = h.lock().core.export_log();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let h = app.get(&id)?;
    let rx = h.committed.subscribe();
    let cursor = q.from.unwrap_or(0) as usize;
    let s = futures::stream::unfold((h, rx, cursor), |(h, mut rx, cursor)| async move {
        loop {
            let (next, closed) = {
                let g = h.lock();
                (g.core.log().get(cursor).cloned(), g.core.status() == SessionStatus::Stopped)
            };
            if let Some(sample) = next {
                let ev = Event::default()
                    .event("sample")
                    .id(sample.step.to_string())
                    .json_data(&sample)
                    .expect("samples serialize");
                return Some((Ok(ev), (h, rx, cursor + 1)));
            }
            if closed || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(Sse::new(s).keep_alive(KeepAlive::default()))
}
