//! HTTP service exposing test administration to a respondent-facing client.
//!
//! Test definitions are loaded once at startup and shared read-only. Live
//! sessions are held in memory; each one sits behind its own lock so that
//! answers to one session are applied one at a time. A session is written
//! to the log when its last item is answered. Sessions idle for longer
//! than the configured timeout are dropped.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use psytest_core::executor::{
    current_item, score_session, start_session_with, submit_answer_at, CurrentItem, Demographics,
    ExecError, Session, SessionResult,
};
use psytest_core::format::{parse_test, TEST_FILE_EXTENSION};
use psytest_core::session_log::{append_record, persist_session};
use psytest_core::{DemographicKind, TestDefinition};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_IDLE_TIMEOUT_SECS: u64 = 30 * 60;

fn default_idle_timeout() -> u64 {
    DEFAULT_IDLE_TIMEOUT_SECS
}

/// Service settings. Also the schema of the optional JSON config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub tests_dir: PathBuf,
    pub session_log: PathBuf,
    #[serde(default)]
    pub reveal_results: bool,
    #[serde(default = "default_idle_timeout")]
    pub idle_timeout_secs: u64,
}

impl ServiceConfig {
    /// Checks that the test directory is readable and the log writable.
    pub fn check(&self) -> anyhow::Result<()> {
        if !self.tests_dir.is_dir() {
            bail!("test directory {} does not exist", self.tests_dir.display());
        }
        std::fs::read_dir(&self.tests_dir)
            .with_context(|| format!("cannot read {}", self.tests_dir.display()))?;
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.session_log)
            .with_context(|| format!("cannot open {} for appending", self.session_log.display()))?;
        Ok(())
    }
}

/// Reads every `.ptest.json` file of `dir`. Invalid files abort the load.
pub fn load_tests(dir: &Path) -> anyhow::Result<BTreeMap<String, Arc<TestDefinition>>> {
    let mut tests = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(TEST_FILE_EXTENSION))
        })
        .collect();
    paths.sort();
    for path in paths {
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let doc = parse_test(&bytes).with_context(|| format!("loading {}", path.display()))?;
        let id = doc.test.test_id.clone();
        if tests.insert(id.clone(), Arc::new(doc.test)).is_some() {
            bail!("test id `{id}` is defined by more than one file");
        }
    }
    Ok(tests)
}

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;
type IdSource = Arc<dyn Fn() -> String + Send + Sync>;

struct LiveSession {
    test: Arc<TestDefinition>,
    session: Session,
    result: Option<SessionResult>,
    last_seen: Instant,
}

pub struct AppState {
    tests: BTreeMap<String, Arc<TestDefinition>>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<LiveSession>>>>,
    session_log: PathBuf,
    log_lock: Mutex<()>,
    reveal_results: bool,
    idle_timeout: Duration,
    clock: Clock,
    ids: IdSource,
}

impl AppState {
    pub fn new(
        tests: BTreeMap<String, Arc<TestDefinition>>,
        session_log: PathBuf,
        reveal_results: bool,
        idle_timeout: Duration,
    ) -> Self {
        Self {
            tests,
            sessions: Mutex::new(HashMap::new()),
            session_log,
            log_lock: Mutex::new(()),
            reveal_results,
            idle_timeout,
            clock: Arc::new(Utc::now),
            ids: Arc::new(|| uuid::Uuid::new_v4().to_string()),
        }
    }

    pub fn from_config(config: &ServiceConfig) -> anyhow::Result<Self> {
        config.check()?;
        Ok(Self::new(
            load_tests(&config.tests_dir)?,
            config.session_log.clone(),
            config.reveal_results,
            Duration::from_secs(config.idle_timeout_secs),
        ))
    }

    /// Replaces the wall clock, e.g. for reproducible logs.
    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    /// Replaces the session id generator.
    pub fn with_ids(mut self, ids: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.ids = Arc::new(ids);
        self
    }

    fn sweep(&self) {
        let timeout = self.idle_timeout;
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        sessions.retain(|_, live| match live.try_lock() {
            Ok(l) => l.last_seen.elapsed() < timeout,
            // Busy means in use right now.
            Err(_) => true,
        });
    }

    fn live(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<LiveSession>>, ApiError> {
        self.sweep();
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "UNKNOWN_SESSION",
                    format!("no session `{id}`"),
                )
            })
    }

    pub fn live_session_count(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").len()
    }

    fn persist(&self, session: &Session, result: &SessionResult) -> Result<(), ApiError> {
        let line = persist_session(session, result).map_err(ApiError::internal)?;
        let _guard = self.log_lock.lock().expect("log lock poisoned");
        append_record(&self.session_log, &line).map_err(ApiError::internal)
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string())
    }
}

impl From<ExecError> for ApiError {
    fn from(e: ExecError) -> Self {
        let msg = e.to_string();
        match e {
            ExecError::MissingDemographic(_)
            | ExecError::UnknownDemographic(_)
            | ExecError::IllTypedDemographic { .. }
            | ExecError::InvalidChoice { .. } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "INVALID_DEMOGRAPHICS",
                msg,
            ),
            ExecError::AnswerOutOfRange { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ANSWER_OUT_OF_RANGE", msg)
            }
            ExecError::SessionCompleted => {
                ApiError::new(StatusCode::CONFLICT, "SESSION_COMPLETED", msg)
            }
            ExecError::NotCompleted => {
                ApiError::new(StatusCode::NOT_FOUND, "SESSION_INCOMPLETE", msg)
            }
            _ => ApiError::internal(msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// Payload describing what the respondent should see next.
fn current_payload(live: &LiveSession) -> Value {
    match current_item(&live.session, &live.test) {
        CurrentItem::Item(item) => json!({
            "ordinal": item.ordinal,
            "total": live.test.items.len(),
            "text": item.text,
            "options": live.test.answer_set.options,
        }),
        CurrentItem::Done => json!({ "done": true }),
    }
}

/// What a respondent may see of a test: no score tuples, no bands and no
/// interpretation texts.
pub fn respondent_view(test: &TestDefinition) -> Value {
    let items: Vec<Value> = test
        .items_in_order()
        .into_iter()
        .map(|i| json!({ "ordinal": i.ordinal, "text": i.text }))
        .collect();
    let demographics: Vec<Value> = test
        .demographics
        .iter()
        .map(|f| match &f.kind {
            DemographicKind::Choice(c) => json!({ "name": f.name, "kind": "choice", "choices": c }),
            k => json!({ "name": f.name, "kind": k.name() }),
        })
        .collect();
    json!({
        "test_id": test.test_id,
        "title": test.title,
        "instruction": test.instruction,
        "answer_options": test.answer_set.options,
        "items": items,
        "demographics": demographics,
    })
}

async fn list_tests(State(state): State<Arc<AppState>>) -> Json<Value> {
    let list: Vec<Value> = state
        .tests
        .values()
        .map(|t| json!({ "test_id": t.test_id, "title": t.title }))
        .collect();
    Json(Value::Array(list))
}

fn find_test(state: &AppState, id: &str) -> Result<Arc<TestDefinition>, ApiError> {
    state.tests.get(id).cloned().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "UNKNOWN_TEST",
            format!("no test `{id}`"),
        )
    })
}

async fn get_test(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let test = find_test(&state, &id)?;
    Ok(Json(respondent_view(&test)))
}

#[derive(Deserialize)]
struct NewSession {
    test_id: String,
    #[serde(default)]
    demographics: Demographics,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: NewSession = parse_body(&body)?;
    let test = find_test(&state, &req.test_id)?;
    state.sweep();
    let id = (state.ids)();
    let session = start_session_with(&test, req.demographics, id.clone(), (state.clock)())?;
    let mut live = LiveSession {
        test,
        session,
        result: None,
        last_seen: Instant::now(),
    };
    // A test without items is complete as soon as it starts.
    if live.session.is_completed() {
        finish(&state, &mut live)?;
    }
    let mut table = state.sessions.lock().expect("session table poisoned");
    if table.contains_key(&id) {
        return Err(ApiError::internal(format!(
            "session id `{id}` already in use"
        )));
    }
    table.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response())
}

fn finish(state: &AppState, live: &mut LiveSession) -> Result<(), ApiError> {
    let result = score_session(&live.session, &live.test)?;
    state.persist(&live.session, &result)?;
    live.result = Some(result);
    Ok(())
}

async fn get_current(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let live = state.live(&id)?;
    let mut live = live.lock().await;
    live.last_seen = Instant::now();
    Ok(Json(current_payload(&live)))
}

#[derive(Deserialize)]
struct AnswerRequest {
    answer_index: usize,
    /// Ordinal the client believes it is answering. When given it must be
    /// the current item, which makes resubmissions detectable.
    #[serde(default)]
    ordinal: Option<u32>,
}

async fn post_answer(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: AnswerRequest = parse_body(&body)?;
    let live = state.live(&id)?;
    let mut live = live.lock().await;
    live.last_seen = Instant::now();
    if live.session.is_completed() {
        return Err(ExecError::SessionCompleted.into());
    }
    if let Some(expected) = req.ordinal {
        if let CurrentItem::Item(item) = current_item(&live.session, &live.test) {
            if item.ordinal != expected {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "OUT_OF_ORDER",
                    format!("current item is {}, not {expected}", item.ordinal),
                ));
            }
        }
    }
    let next = submit_answer_at(&live.session, &live.test, req.answer_index, (state.clock)())?;
    if next.is_completed() {
        let mut staged = LiveSession {
            test: live.test.clone(),
            session: next,
            result: None,
            last_seen: live.last_seen,
        };
        finish(&state, &mut staged)?;
        *live = staged;
    } else {
        live.session = next;
    }
    Ok(Json(current_payload(&live)))
}

async fn get_result(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let live = state.live(&id)?;
    let mut live = live.lock().await;
    live.last_seen = Instant::now();
    if !state.reveal_results {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "RESULT_WITHHELD",
            "results are not shown to respondents",
        ));
    }
    let Some(result) = &live.result else {
        return Err(ExecError::NotCompleted.into());
    };
    let categories: Vec<Value> = result
        .categories
        .iter()
        .map(|c| {
            let name = live
                .test
                .category(&c.category_id)
                .map_or("", |x| x.name.as_str());
            json!({
                "category_id": c.category_id,
                "category": name,
                "raw_score": c.raw_score.to_string(),
                "band_index": c.band_index,
                "interpretation": c.interpretation,
            })
        })
        .collect();
    Ok(Json(json!({
        "session_id": result.session_id,
        "results": categories,
    })))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/tests", get(list_tests))
        .route("/tests/{id}", get(get_test))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/current", get(get_current))
        .route("/sessions/{id}/answer", post(post_answer))
        .route("/sessions/{id}/result", get(get_result))
        .fallback(not_found)
        .with_state(state)
}

/// Binds `config.listen` and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = Arc::new(AppState::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    eprintln!(
        "psytest: serving {} test(s) on http://{}",
        state.tests.len(),
        listener.local_addr()?
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
