//! HTTP/JSON front end for operator sessions.
//!
//! Every mutating request appends exactly one event; every read is a view of
//! the replayed session state. Logs are kept as `<session-id>.jsonl` when a
//! data directory is configured.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use erms_core::session::{EventKind, EventLog, ScenarioCatalog, Session, SessionEvent};
use erms_core::{FramingConstraints, Heuristic, SessionError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

type Shared = Arc<RwLock<Session>>;

pub struct AppState {
    catalog: ScenarioCatalog,
    log: Option<EventLog>,
    sessions: RwLock<BTreeMap<String, Shared>>,
    next_id: RwLock<u64>,
}

impl AppState {
    /// Service state over `catalog`; with a log, previously stored sessions
    /// are replayed and new events are appended to disk.
    pub fn new(catalog: ScenarioCatalog, log: Option<EventLog>) -> Result<Self, SessionError> {
        let mut sessions = BTreeMap::new();
        let mut next_id = 1;
        if let Some(log) = &log {
            for id in log.session_ids()? {
                let session = Session::from_events(id.clone(), log.read(&id)?, &catalog)?;
                if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    next_id = next_id.max(n + 1);
                }
                sessions.insert(id, Arc::new(RwLock::new(session)));
            }
        }
        Ok(Self {
            catalog,
            log,
            sessions: RwLock::new(sessions),
            next_id: RwLock::new(next_id),
        })
    }

    pub fn in_memory() -> Self {
        Self::new(ScenarioCatalog::builtin(), None).expect("no log to replay")
    }

    fn session(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_owned()).into())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/observations", post(post_observation))
        .route("/sessions/{id}/test-results", post(post_test_result))
        .route("/sessions/{id}/advance", post(post_advance))
        .route("/sessions/{id}/level", post(post_level))
        .route("/sessions/{id}/ignition", post(post_ignition))
        .route("/sessions/{id}/diagnosis", get(get_diagnosis))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .route("/sessions/{id}/plan", post(post_plan))
        .route("/sessions/{id}/profile", get(get_profile))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
            SessionError::OutOfOrder { .. } | SessionError::Conflict { .. } => StatusCode::CONFLICT,
            SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn session_view(session: &Session) -> Value {
    let s = session.state();
    let bundle = session.bundle();
    json!({
        "id": session.id,
        "scenario_id": s.scenario_id,
        "seq": s.last_seq,
        "clock": s.clock,
        "status_quo_level": s.status_quo_level,
        "status_quo_level_name": bundle.level_name(s.status_quo_level),
        "levels": bundle.transitions.levels.iter().map(|l| &l.name).collect::<Vec<_>>(),
        "evidence": s.evidence,
        "test_results": s.test_results,
        "ignition_evident": s.ignition_evident,
        "diagnosis": s.diagnosis,
        "belief": s.belief,
        "severity": s.severity,
        "response": s.severity.response(),
        "events": session.events().len(),
    })
}

fn mutation_view(session: &Session, event: &SessionEvent) -> Value {
    json!({ "event": event, "session": session_view(session) })
}

/// Optimistic concurrency token: `expected_seq` in the body or an
/// `If-Match` header holding the last seq the client saw.
fn expected_seq(headers: &HeaderMap, body: Option<u64>) -> Result<Option<u64>, ApiError> {
    if let Some(seq) = body {
        return Ok(Some(seq));
    }
    let Some(value) = headers.get(axum::http::header::IF_MATCH) else {
        return Ok(None);
    };
    let text = value
        .to_str()
        .map_err(|_| ApiError::bad_request("If-Match is not text"))?
        .trim()
        .trim_start_matches("W/")
        .trim_matches('"');
    text.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match `{text}` is not a seq number")))
}

fn mutate(
    app: &AppState,
    id: &str,
    headers: &HeaderMap,
    expected: Option<u64>,
    kind: EventKind,
) -> ApiResult {
    let expected = expected_seq(headers, expected)?;
    let shared = app.session(id)?;
    let mut session = shared.write().expect("session lock");
    if let Some(expected) = expected {
        let current = session.state().last_seq;
        if expected != current {
            return Err(SessionError::Conflict { expected, current }.into());
        }
    }
    let pending = session.prepare(kind)?;
    if let Some(log) = &app.log {
        log.append(id, pending.event())?;
    }
    let event = session.commit(pending)?.clone();
    Ok(Json(mutation_view(&session, &event)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    scenario_id: String,
    #[serde(default)]
    status_quo_level: Option<usize>,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Result<Json<CreateBody>, JsonRejection>) -> ApiResult {
    let Json(body) = body?;
    let bundle = app
        .catalog
        .get(&body.scenario_id)
        .ok_or_else(|| SessionError::UnknownScenario(body.scenario_id.clone()))?;
    let mut next_id = app.next_id.write().expect("id lock");
    let id = format!("s{}", *next_id);
    let session = Session::create(id.clone(), bundle, body.status_quo_level.unwrap_or(0))?;
    if let Some(log) = &app.log {
        log.append(&id, &session.events()[0])?;
    }
    *next_id += 1;
    let view = mutation_view(&session, &session.events()[0]);
    app.sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let shared = app.session(&id)?;
    let session = shared.read().expect("session lock");
    Ok(Json(session_view(&session)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationBody {
    node: String,
    outcome: String,
    expected_seq: Option<u64>,
}

async fn post_observation(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<ObservationBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    mutate(&app, &id, &headers, b.expected_seq, EventKind::Observation { node: b.node, outcome: b.outcome })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TestResultBody {
    test_id: String,
    outcome: String,
    expected_seq: Option<u64>,
}

async fn post_test_result(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<TestResultBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    mutate(&app, &id, &headers, b.expected_seq, EventKind::TestResult { test_id: b.test_id, outcome: b.outcome })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvanceBody {
    dt: f64,
    expected_seq: Option<u64>,
}

async fn post_advance(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<AdvanceBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    mutate(&app, &id, &headers, b.expected_seq, EventKind::TimeAdvance { dt: b.dt })
}

/// A level by index or by name.
#[derive(Deserialize)]
#[serde(untagged)]
enum LevelRef {
    Index(usize),
    Name(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelBody {
    level: LevelRef,
    expected_seq: Option<u64>,
}

async fn post_level(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<LevelBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let level = match b.level {
        LevelRef::Index(i) => i,
        LevelRef::Name(name) => {
            let shared = app.session(&id)?;
            let session = shared.read().expect("session lock");
            session
                .bundle()
                .level_index(&name)
                .ok_or_else(|| ApiError::bad_request(format!("unknown shutdown level `{name}`")))?
        }
    };
    mutate(&app, &id, &headers, b.expected_seq, EventKind::LevelSet { level })
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IgnitionBody {
    expected_seq: Option<u64>,
}

async fn post_ignition(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Option<Json<IgnitionBody>>,
) -> ApiResult {
    let b = body.map(|Json(b)| b).unwrap_or_default();
    mutate(&app, &id, &headers, b.expected_seq, EventKind::IgnitionReported)
}

async fn get_diagnosis(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let shared = app.session(&id)?;
    let session = shared.read().expect("session lock");
    Ok(Json(session.diagnosis()).into_response())
}

async fn get_recommendation(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let shared = app.session(&id)?;
    let session = shared.read().expect("session lock");
    Ok(Json(session.recommendation()?).into_response())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlanBody {
    constraints: Option<FramingConstraints>,
    heuristic: Option<String>,
    seed: Option<u64>,
}

async fn post_plan(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<PlanBody>>,
) -> ApiResult {
    let b = body.map(|Json(b)| b).unwrap_or_default();
    let heuristic = match &b.heuristic {
        Some(h) => h.parse::<Heuristic>().map_err(ApiError::bad_request)?,
        None => Heuristic::HighestEvPath,
    };
    let session = app.session(&id)?.read().expect("session lock").clone();
    let mut constraints = b.constraints.unwrap_or_else(|| session.bundle().constraints_default.clone());
    if let Some(seed) = b.seed {
        constraints.seed = seed;
    }
    constraints
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let plan = tokio::task::spawn_blocking(move || session.plan(Some(&constraints), heuristic))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })??;
    Ok(Json(plan).into_response())
}

#[derive(Serialize)]
struct ProfileView<'a> {
    session_id: &'a str,
    points: &'a [erms_core::ProfilePoint],
}

async fn get_profile(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let shared = app.session(&id)?;
    let session = shared.read().expect("session lock");
    Ok(Json(ProfileView {
        session_id: &session.id,
        points: session.profile(),
    })
    .into_response())
}
