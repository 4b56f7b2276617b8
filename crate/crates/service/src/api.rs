//! HTTP API used by the chat front end.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | /health | store counts and backend identities |
//! | GET | /schema | JSON schema of a turn record |
//! | POST | /sessions | open a session, optional config overrides |
//! | POST | /sessions/{id}/messages | run one turn |
//! | GET | /sessions/{id}/transcript | all turn records |
//! | DELETE | /sessions/{id} | close a session |

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use advisor_core::engine::{Engine, TurnError};
use advisor_core::inner_speech::{DialogueSession, SessionConfig, SessionEvent, SessionState};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::transcript::{TurnRecord, TURN_RECORD_SCHEMA};

struct Slot {
    session: Mutex<DialogueSession>,
    transcript: Mutex<Vec<TurnRecord>>,
}

pub struct AppState {
    engine: Arc<Engine>,
    defaults: SessionConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
    log: Option<Mutex<File>>,
}

impl AppState {
    pub fn new(engine: Engine, defaults: SessionConfig, log: Option<File>) -> Arc<Self> {
        Arc::new(AppState {
            engine: Arc::new(engine),
            defaults,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            log: log.map(Mutex::new),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session '{id}'")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", r.body_text())
    }
}

/// Optional overrides of the service's session defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub replan_cap: Option<u32>,
    pub transparency: Option<bool>,
    pub memory_budget: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub config: SessionConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMessage {
    pub text: String,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(close_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(state)
}

async fn health(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let store = app.engine.store().read();
    Json(json!({
        "status": "ok",
        "users": store.user_count(),
        "dishes": store.dish_count(),
        "backends": app.engine.identity(),
        "sessions": app.sessions.lock().len(),
    }))
}

async fn schema() -> Response {
    ([("content-type", "application/schema+json")], TURN_RECORD_SCHEMA).into_response()
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Option<Json<CreateSession>>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let overrides = body?.map(|Json(b)| b).unwrap_or_default();
    let config = SessionConfig {
        replan_cap: overrides.replan_cap.unwrap_or(app.defaults.replan_cap),
        transparency: overrides.transparency.unwrap_or(app.defaults.transparency),
        memory_budget: overrides.memory_budget.unwrap_or(app.defaults.memory_budget),
    };
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let session = DialogueSession::new(id.clone(), &config)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()))?;
    app.sessions.lock().insert(
        id.clone(),
        Arc::new(Slot { session: Mutex::new(session), transcript: Mutex::new(Vec::new()) }),
    );
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id, config })))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<PostMessage>, JsonRejection>,
) -> Result<Json<TurnRecord>, ApiError> {
    let Json(msg) = body?;
    let slot = app.slot(&id)?;
    if msg.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "text must not be empty"));
    }
    let worker = app.clone();
    tokio::task::spawn_blocking(move || {
        let Some(mut session) = slot.session.try_lock() else {
            return Err(ApiError::new(StatusCode::CONFLICT, "turn_in_progress", "a turn is already running for this session"));
        };
        let outcome = worker.engine.run_turn(&mut session, &msg.text).map_err(|e| match e {
            TurnError::SessionClosed => ApiError::new(StatusCode::NOT_FOUND, "session_closed", "session is closed"),
            TurnError::EmptyUtterance => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "text must not be empty"),
            TurnError::Internal(m) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        })?;
        let record = TurnRecord::new(&session.id, &msg.text, &outcome);
        slot.transcript.lock().push(record.clone());
        if let Some(log) = &worker.log {
            let line = serde_json::to_string(&record).expect("record serializes");
            let _ = writeln!(log.lock(), "{line}");
        }
        Ok(Json(record))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn transcript(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = app.slot(&id)?;
    let turns = slot.transcript.lock().clone();
    let state = slot.session.try_lock().map(|s| s.state());
    Ok(Json(json!({ "session_id": id, "state": state, "turns": turns })))
}

async fn close_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = app.slot(&id)?;
    let Some(mut session) = slot.session.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "turn_in_progress", "a turn is already running for this session"));
    };
    if session.state() == SessionState::Closed {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "session_closed", "session is closed"));
    }
    session.apply(SessionEvent::Close);
    Ok(Json(json!({ "session_id": id, "state": session.state() })))
}
