//! HTTP API over JSON.
//!
//! | method | path                          | body / result                          |
//! |--------|-------------------------------|----------------------------------------|
//! | GET    | `/formulas`                   | catalog entries                        |
//! | POST   | `/check`                      | `CheckRequest` → verdict               |
//! | GET    | `/sessions`                   | session views                          |
//! | POST   | `/sessions`                   | `CreateSession` → session view (201)   |
//! | GET    | `/sessions/{id}`              | session view                           |
//! | GET    | `/sessions/{id}/moves`        | legal moves with tokens                |
//! | POST   | `/sessions/{id}/moves`        | `Submission` → step result             |
//! | POST   | `/sessions/{id}/auto`         | step result                            |
//! | GET    | `/sessions/{id}/hint`         | certified move, if any                 |
//! | GET    | `/sessions/{id}/transcript`   | table, transcript and network trace    |
//!
//! Either side may submit moves; the roles only decide which side
//! `/auto` may play.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use protogame::game::{Mover, Transcript};
use protogame::validity::{SearchLimits, Verdict};
use protogame::{solve, NetEvent, SessionTrace};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{Catalog, CatalogEntry, LoadError};
use crate::session::{
    annotation, now, ExplicitMove, Hint, MoveOption, Roles, Session, SessionError, SessionLimits, SessionMeta,
    SessionView,
};
use crate::store::{LogEntry, Store, StoreError};

/// Shared server state.
pub struct AppState {
    catalog: Catalog,
    store: Option<Store>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Server state over a catalog; sessions in the store are recovered.
    pub fn new(catalog: Catalog, store: Option<Store>) -> Result<AppState, StoreError> {
        let mut sessions = HashMap::new();
        if let Some(st) = &store {
            for s in st.load_all()? {
                sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(AppState { catalog, store, sessions: RwLock::new(sessions) })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session `{id}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::Closed(_) => StatusCode::GONE,
            SessionError::Illegal(_) | SessionError::StaleToken | SessionError::NotEngineTurn(_) => {
                StatusCode::CONFLICT
            }
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::Load(LoadError::UnknownName { .. }) => StatusCode::NOT_FOUND,
            SessionError::Load(_) => StatusCode::BAD_REQUEST,
            SessionError::Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        SessionError::from(e).into()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Body of `POST /sessions`. `program` overrides the server catalog;
/// `human` is a shorthand for roles with the engine on the other side.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateSession {
    pub formula: String,
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub human: Option<Mover>,
    #[serde(default)]
    pub roles: Option<Roles>,
    #[serde(default)]
    pub limits: Option<SessionLimits>,
}

/// Body of `POST /sessions/{id}/moves`: a token, or a move by content.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Submission {
    Token { token: String },
    Explicit(ExplicitMove),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepResult {
    pub event: NetEvent,
    pub annotation: String,
    pub session: SessionView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MovesView {
    pub version: usize,
    pub turn: Mover,
    pub moves: Vec<MoveOption>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptView {
    pub table: String,
    pub timeline: String,
    pub transcript: Transcript,
    pub trace: SessionTrace,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CheckRequest {
    pub formula: String,
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub limits: Option<SearchLimits>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub formula: String,
    pub cached: bool,
    #[serde(flatten)]
    pub verdict: Verdict,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/formulas", get(formulas))
        .route("/check", post(check))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/moves", get(legal_moves).post(submit))
        .route("/sessions/{id}/auto", post(auto_step))
        .route("/sessions/{id}/hint", get(hint))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(state)
}

async fn formulas(State(app): State<Arc<AppState>>) -> Json<Vec<CatalogEntry>> {
    Json(app.catalog.entries())
}

fn catalog_for(app: &AppState, program: &Option<String>) -> Result<Catalog, ApiError> {
    match program {
        Some(text) => Ok(Catalog::parse(text, "<request>")?),
        None => Ok(app.catalog.clone()),
    }
}

async fn check(State(app): State<Arc<AppState>>, Json(req): Json<CheckRequest>) -> ApiResult<CheckResult> {
    let catalog = catalog_for(&app, &req.program)?;
    let root = catalog.root(&req.formula)?;
    let lim = req.limits.unwrap_or_default();
    if let Some(v) = app.store.as_ref().and_then(|s| s.cached_verdict(&root, &lim)) {
        return Ok(Json(CheckResult { formula: req.formula, cached: true, verdict: v }));
    }
    let engine = catalog.engine(lim.policy());
    let verdict = tokio::task::spawn_blocking(move || solve(&engine, &root, &lim).map(|v| (root, v)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(SessionError::from)?;
    if let Some(st) = &app.store {
        st.cache_verdict(&verdict.0, &lim, &verdict.1)?;
    }
    Ok(Json(CheckResult { formula: req.formula, cached: false, verdict: verdict.1 }))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<SessionView>> {
    let sessions: Vec<_> = app.sessions.read().expect("session table").values().cloned().collect();
    let mut views: Vec<SessionView> = sessions.iter().map(|s| s.lock().expect("session").view()).collect();
    views.sort_by(|a, b| (a.created, &a.id).cmp(&(b.created, &b.id)));
    Json(views)
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let catalog = catalog_for(&app, &req.program)?;
    let roles = req.roles.or(req.human.map(Roles::human)).unwrap_or_default();
    let meta = SessionMeta {
        id: uuid::Uuid::new_v4().simple().to_string(),
        formula_name: req.formula,
        origin: catalog.origin.clone(),
        program: catalog.text.clone(),
        roles,
        limits: req.limits.unwrap_or_default(),
        created: now(),
    };
    let session = Session::create(meta)?;
    if let Some(st) = &app.store {
        st.create(&session.record)?;
    }
    let view = session.view();
    app.sessions.write().expect("session table").insert(view.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let s = app.session(&id)?;
    let view = s.lock().expect("session").view();
    Ok(Json(view))
}

async fn legal_moves(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<MovesView> {
    let s = app.session(&id)?;
    let s = s.lock().expect("session");
    Ok(Json(MovesView { version: s.record.version(), turn: s.state().turn, moves: s.legal_moves()? }))
}

/// Runs a state-changing step. A session already being changed answers
/// with a conflict rather than queueing, so moves never interleave.
fn step(
    app: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<NetEvent, SessionError>,
) -> Result<StepResult, ApiError> {
    let s = app.session(id)?;
    let mut guard = s
        .try_lock()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "another move is being applied to this session"))?;
    let version = guard.record.version();
    let mut next = guard.clone();
    let event = f(&mut next)?;
    if let Some(st) = &app.store {
        let mv = next.record.transcript.rows[version].mv.clone();
        st.record_move(&next.record, &LogEntry { version, mv })?;
    }
    *guard = next;
    Ok(StepResult { annotation: annotation(&event), event, session: guard.view() })
}

async fn submit(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(sub): Json<Submission>,
) -> ApiResult<StepResult> {
    let r = match sub {
        Submission::Token { token } => step(&app, &id, |s| s.submit_token(&token)),
        Submission::Explicit(m) => step(&app, &id, |s| s.submit_explicit(&m)),
    };
    r.map(Json)
}

async fn auto_step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StepResult> {
    let app2 = app.clone();
    tokio::task::spawn_blocking(move || step(&app2, &id, Session::auto_step))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
}

async fn hint(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Hint> {
    let s = app.session(&id)?;
    let snapshot = s.lock().expect("session").clone();
    let h = tokio::task::spawn_blocking(move || snapshot.hint())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(h))
}

async fn transcript(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<TranscriptView> {
    let s = app.session(&id)?;
    let s = s.lock().expect("session");
    let trace = s.trace()?;
    Ok(Json(TranscriptView {
        table: s.record.transcript.to_table(),
        timeline: trace.timeline(),
        transcript: s.record.transcript.clone(),
        trace,
    }))
}

/// Serves the API until the process is interrupted.
pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
