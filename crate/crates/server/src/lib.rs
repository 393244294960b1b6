//! JSON API under `/api` for dashboards, rankings, entity details, the
//! labeling workflow and miner administration.

pub mod auth;

use std::collections::HashSet;
use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use cra_core::ingest::gerrit::{epoch, MineError, MineOutcome, Miner, MinerConfig};
use cra_core::metrics::{EntityKind, Period, RankKey};
use cra_core::model::{timestamp, CommentCategory, Timestamp, UsefulnessLabel};
use cra_core::report::{self, DEFAULT_LIMIT, DEFAULT_PERIOD_MONTHS};
use cra_core::store::{LabelingItem, Store, StoreError, LABEL_MIN_COMMENTS, LABEL_WINDOW_MONTHS};

pub use auth::User;

pub const MIN_MINE_INTERVAL_SECS: u64 = 60;
pub const INTERVAL_SETTING: &str = "mine_interval_secs";
pub const DEFAULT_MONTHS: u32 = 6;
const MAX_MONTHS: u32 = 120;
const MAX_LIMIT: usize = 1000;

/// Source of the current time, replaceable in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        cra_core::model::to_seconds(Utc::now())
    }
}

/// A clock that only moves when told to.
pub struct FixedClock(pub Mutex<Timestamp>);

impl FixedClock {
    pub fn new(at: Timestamp) -> Self {
        FixedClock(Mutex::new(at))
    }

    pub fn set(&self, at: Timestamp) {
        *self.0.lock().unwrap() = at;
    }
}

impl Clock for FixedClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().unwrap()
    }
}

pub type MineFuture = Pin<Box<dyn Future<Output = Result<MineOutcome, MineError>> + Send>>;

/// Fetches review data updated since a timestamp.
pub type MineFn = Arc<dyn Fn(Timestamp) -> MineFuture + Send + Sync>;

/// Mines the configured review server.
pub fn gerrit_source(config: MinerConfig) -> MineFn {
    Arc::new(move |since| {
        let config = config.clone();
        Box::pin(async move { cra_core::ingest::gerrit::mine_incremental(&config, since).await })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiConfig {
    #[serde(default)]
    pub users: Vec<User>,
    /// Link to a comment in the review tool; `{change_id}` and
    /// `{comment_id}` are substituted.
    #[serde(default)]
    pub deep_link_template: Option<String>,
    /// Key for the miner high-water mark.
    #[serde(default = "default_endpoint")]
    pub miner_endpoint: String,
    #[serde(default = "default_interval")]
    pub default_mine_interval_secs: u64,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            users: Vec::new(),
            deep_link_template: None,
            miner_endpoint: default_endpoint(),
            default_mine_interval_secs: default_interval(),
        }
    }
}

fn default_endpoint() -> String {
    "default".into()
}

fn default_interval() -> u64 {
    3600
}

pub struct AppState {
    pub store: Arc<Store>,
    pub config: ApiConfig,
    pub clock: Arc<dyn Clock>,
    pub session_key: Vec<u8>,
    pub miner: Miner,
    pub mine: Option<MineFn>,
    inflight: Mutex<HashSet<(String, String)>>,
}

impl AppState {
    pub fn new(store: Arc<Store>, config: ApiConfig, clock: Arc<dyn Clock>, session_key: Vec<u8>, mine: Option<MineFn>) -> Self {
        AppState {
            store,
            config,
            clock,
            session_key,
            miner: Miner::new(),
            mine,
            inflight: Mutex::new(HashSet::new()),
        }
    }

    /// `None` while another submission by the same rater for the same
    /// comment is in progress.
    pub fn claim_submission(&self, rater_id: &str, comment_id: &str) -> Option<SubmissionSlot<'_>> {
        let key = (rater_id.to_string(), comment_id.to_string());
        let fresh = self.inflight.lock().unwrap_or_else(|e| e.into_inner()).insert(key.clone());
        fresh.then_some(SubmissionSlot { set: &self.inflight, key })
    }

    pub fn mine_interval_secs(&self) -> u64 {
        self.store
            .setting(INTERVAL_SETTING)
            .ok()
            .flatten()
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.config.default_mine_interval_secs)
    }
}

pub type Shared = Arc<AppState>;

pub const SESSION_SECRET_ENV: &str = "CRA_SESSION_SECRET";

/// Key for signing session cookies. Without the environment variable a
/// random key is drawn, so sessions do not survive a restart.
pub fn session_key_from_env() -> Vec<u8> {
    match std::env::var(SESSION_SECRET_ENV) {
        Ok(secret) if !secret.is_empty() => secret.into_bytes(),
        _ => {
            use rand::RngCore;
            let mut key = vec![0u8; 32];
            rand::rngs::OsRng.fill_bytes(&mut key);
            key
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Unauthorized,
    Forbidden(String),
    NotFound(String),
    Conflict(String),
    Unavailable(String),
    Internal,
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotChangeAuthor { .. } => ApiError::Forbidden("not the author of this change".into()),
            StoreError::UnknownComment(id) => ApiError::NotFound(format!("unknown comment {id}")),
            other => {
                // details stay in the log; they may name files on disk
                tracing::error!("store: {other}");
                ApiError::Internal
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "authentication required".into()),
            ApiError::Forbidden(m) => (StatusCode::FORBIDDEN, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unavailable(m) => (StatusCode::SERVICE_UNAVAILABLE, m),
            ApiError::Internal => (StatusCode::INTERNAL_SERVER_ERROR, "internal error".into()),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/dashboard", get(dashboard))
        .route("/api/rankings", get(rankings))
        .route("/api/entities/:kind/:id", get(entity))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/labeling/next", get(labeling_next))
        .route("/api/labeling/submit", post(labeling_submit))
        .route("/api/labeling/progress", get(labeling_progress))
        .route("/api/admin/mine/run", post(mine_run))
        .route("/api/admin/mine/interval", put(mine_interval).get(get_mine_interval))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Accepts `YYYY-MM-DD` (midnight UTC) or an RFC 3339 timestamp.
pub fn parse_instant(raw: &str) -> Result<Timestamp, String> {
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight")));
    }
    timestamp::parse(raw)
}

#[derive(Debug, Deserialize)]
struct RangeQuery {
    from: Option<String>,
    to: Option<String>,
}

fn period(state: &AppState, q: &RangeQuery) -> ApiResult<Period> {
    match (&q.from, &q.to) {
        (None, None) => Ok(report::default_period(state.clock.now(), DEFAULT_PERIOD_MONTHS)),
        (Some(f), Some(t)) => {
            let from = parse_instant(f).map_err(ApiError::BadRequest)?;
            let to = parse_instant(t).map_err(ApiError::BadRequest)?;
            if from >= to {
                return Err(ApiError::BadRequest("`from` must be earlier than `to`".into()));
            }
            Ok(Period { from, to })
        }
        _ => Err(ApiError::BadRequest("give both `from` and `to`, or neither".into())),
    }
}

async fn dashboard(State(s): State<Shared>, Query(q): Query<RangeQuery>) -> ApiResult<Json<report::DashboardSummary>> {
    let p = period(&s, &q)?;
    Ok(Json(report::dashboard(&s.store, &p)?))
}

#[derive(Debug, Deserialize)]
struct RankingQuery {
    from: Option<String>,
    to: Option<String>,
    entity: Option<String>,
    key: Option<String>,
    offset: Option<String>,
    limit: Option<String>,
}

fn count_param(name: &str, raw: Option<&str>, default: usize) -> ApiResult<usize> {
    raw.map_or(Ok(default), |v| {
        v.parse()
            .map_err(|_| ApiError::BadRequest(format!("`{name}` must be a non-negative integer")))
    })
}

async fn rankings(State(s): State<Shared>, Query(q): Query<RankingQuery>) -> ApiResult<Json<report::RankingTable>> {
    let p = period(&s, &RangeQuery { from: q.from.clone(), to: q.to.clone() })?;
    let entity: EntityKind = q.entity.as_deref().unwrap_or("reviewer").parse().map_err(ApiError::BadRequest)?;
    let key: RankKey = q.key.as_deref().unwrap_or("ri").parse().map_err(ApiError::BadRequest)?;
    let offset = count_param("offset", q.offset.as_deref(), 0)?;
    let limit = count_param("limit", q.limit.as_deref(), DEFAULT_LIMIT)?.min(MAX_LIMIT);
    Ok(Json(report::ranking_table(&s.store, &p, entity, key, offset, limit)?))
}

#[derive(Debug, Deserialize)]
struct MonthsQuery {
    months: Option<String>,
}

async fn entity(
    State(s): State<Shared>,
    Path((kind, id)): Path<(String, String)>,
    Query(q): Query<MonthsQuery>,
) -> ApiResult<Json<report::EntityTimeseries>> {
    let kind: EntityKind = kind.parse().map_err(ApiError::NotFound)?;
    let months = q.months.as_deref().map_or(Ok(DEFAULT_MONTHS), str::parse).unwrap_or(0);
    if months == 0 || months > MAX_MONTHS {
        return Err(ApiError::BadRequest(format!("months must be between 1 and {MAX_MONTHS}")));
    }
    report::entity_timeseries(&s.store, kind, &id, months, s.clock.now())?
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown {} {id}", kind.id_column().trim_end_matches("_id"))))
}

#[derive(Debug, Deserialize)]
struct LoginBody {
    user_id: String,
    password: String,
}

async fn login(State(s): State<Shared>, Json(body): Json<LoginBody>) -> ApiResult<Response> {
    let user = auth::verify_password(&s.config.users, &body.user_id, &body.password).ok_or(ApiError::Unauthorized)?;
    let token = auth::issue(&s.session_key, &user.id, s.clock.now());
    let cookie = format!("{}={token}; Path=/; HttpOnly; SameSite=Strict; Max-Age={}", auth::COOKIE, auth::SESSION_HOURS * 3600);
    Ok((
        [(header::SET_COOKIE, cookie)],
        Json(json!({ "user_id": user.id, "admin": user.admin })),
    )
        .into_response())
}

async fn logout() -> Response {
    let cookie = format!("{}=; Path=/; HttpOnly; SameSite=Strict; Max-Age=0", auth::COOKIE);
    ([(header::SET_COOKIE, cookie)], StatusCode::NO_CONTENT).into_response()
}

fn session(s: &AppState, headers: &HeaderMap) -> ApiResult<(auth::Session, User)> {
    let token = headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .find_map(auth::cookie_value)
        .ok_or(ApiError::Unauthorized)?;
    let session = auth::verify(&s.session_key, token, s.clock.now()).ok_or(ApiError::Unauthorized)?;
    // accounts removed from the configuration lose access immediately
    let user = s
        .config
        .users
        .iter()
        .find(|u| u.id == session.user_id)
        .cloned()
        .ok_or(ApiError::Unauthorized)?;
    Ok((session, user))
}

#[derive(Debug, Serialize)]
struct NextItem {
    #[serde(flatten)]
    item: LabelingItem,
    deep_link: Option<String>,
}

#[derive(Debug, Serialize)]
struct NextResponse {
    item: Option<NextItem>,
    categories: Vec<&'static str>,
}

async fn labeling_next(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Json<NextResponse>> {
    let (session, user) = session(&s, &headers)?;
    let item = s.store.next_unlabeled(&user.id, session.seed())?.map(|item| {
        let deep_link = s.config.deep_link_template.as_ref().map(|t| {
            t.replace("{change_id}", &item.change_id)
                .replace("{comment_id}", &item.comment.comment_id)
        });
        NextItem { item, deep_link }
    });
    Ok(Json(NextResponse {
        item,
        categories: CommentCategory::ALL.iter().map(|c| c.as_str()).collect(),
    }))
}

#[derive(Debug, Deserialize)]
struct SubmitBody {
    comment_id: String,
    is_useful: bool,
    category: String,
}

#[derive(Debug, Serialize)]
struct ProgressResponse {
    labeled: usize,
    total: usize,
    eligible: bool,
}

fn progress(s: &AppState, user_id: &str) -> ApiResult<ProgressResponse> {
    let p = s.store.label_progress(user_id)?;
    let eligible = s
        .store
        .eligible_labelers(s.clock.now(), LABEL_WINDOW_MONTHS, LABEL_MIN_COMMENTS)?
        .iter()
        .any(|d| d == user_id);
    Ok(ProgressResponse {
        labeled: p.labeled,
        total: p.total,
        eligible,
    })
}

/// Held while a label submission is being stored; released on drop.
pub struct SubmissionSlot<'a> {
    set: &'a Mutex<HashSet<(String, String)>>,
    key: (String, String),
}

impl Drop for SubmissionSlot<'_> {
    fn drop(&mut self) {
        self.set.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.key);
    }
}

async fn labeling_submit(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(body): Json<SubmitBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let (_, user) = session(&s, &headers)?;
    let category: CommentCategory = body
        .category
        .parse()
        .map_err(|e: cra_core::model::UnknownCategory| ApiError::BadRequest(e.to_string()))?;
    let _slot = s
        .claim_submission(&user.id, &body.comment_id)
        .ok_or_else(|| ApiError::Conflict("a submission for this comment is already in progress".into()))?;
    let now = s.clock.now();
    let label = UsefulnessLabel {
        comment_id: body.comment_id,
        rater_id: user.id.clone(),
        is_useful: body.is_useful,
        category,
        labeled_at: now,
    };
    let replaced = s.store.submit_label(&label, now)?;
    let p = progress(&s, &user.id)?;
    Ok(Json(json!({ "replaced": replaced, "progress": p })))
}

async fn labeling_progress(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Json<ProgressResponse>> {
    let (_, user) = session(&s, &headers)?;
    Ok(Json(progress(&s, &user.id)?))
}

fn admin(s: &AppState, headers: &HeaderMap) -> ApiResult<User> {
    let (_, user) = session(s, headers)?;
    if !user.admin {
        return Err(ApiError::Forbidden("administrator role required".into()));
    }
    Ok(user)
}

/// Starts a mining run in the background unless one is already running.
pub fn trigger_mine(state: &Shared) -> ApiResult<()> {
    let mine = state
        .mine
        .clone()
        .ok_or_else(|| ApiError::Unavailable("no review server is configured".into()))?;
    let guard = state
        .miner
        .try_begin()
        .map_err(|_| ApiError::Conflict("a mining run is already in progress".into()))?;
    let state = Arc::clone(state);
    tokio::spawn(async move {
        let _guard = guard;
        let endpoint = state.config.miner_endpoint.clone();
        let since = match state.store.high_water_mark(&endpoint) {
            Ok(mark) => mark.unwrap_or_else(epoch),
            Err(e) => {
                tracing::error!("mining aborted: {e}");
                return;
            }
        };
        match mine(since).await {
            Ok(out) => {
                let stored = state
                    .store
                    .upsert_dump(&out.dump)
                    .and_then(|counts| state.store.set_high_water_mark(&endpoint, out.high_water_mark).map(|_| counts));
                match stored {
                    Ok(c) => tracing::info!(inserted = c.inserted, updated = c.updated, "mining run finished"),
                    Err(e) => tracing::error!("storing mined data failed: {e}"),
                }
            }
            Err(e) => tracing::error!("mining run failed: {e}"),
        }
    });
    Ok(())
}

async fn mine_run(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Response> {
    admin(&s, &headers)?;
    trigger_mine(&s)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "started": true }))).into_response())
}

#[derive(Debug, Deserialize)]
struct IntervalBody {
    seconds: u64,
}

async fn mine_interval(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(body): Json<IntervalBody>,
) -> ApiResult<Json<serde_json::Value>> {
    admin(&s, &headers)?;
    if body.seconds < MIN_MINE_INTERVAL_SECS {
        return Err(ApiError::BadRequest(format!("interval must be at least {MIN_MINE_INTERVAL_SECS} seconds")));
    }
    s.store.set_setting(INTERVAL_SETTING, &body.seconds.to_string())?;
    Ok(Json(json!({ "seconds": body.seconds })))
}

async fn get_mine_interval(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Json<serde_json::Value>> {
    admin(&s, &headers)?;
    Ok(Json(json!({ "seconds": s.mine_interval_secs(), "running": s.miner.is_running() })))
}

/// Triggers a mining run every configured interval; the interval is re-read
/// after each run so changes through the API take effect.
pub fn spawn_scheduler(state: Shared) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        loop {
            let secs = state.mine_interval_secs().max(MIN_MINE_INTERVAL_SECS);
            tokio::time::sleep(std::time::Duration::from_secs(secs)).await;
            if let Err(e) = trigger_mine(&state) {
                tracing::warn!("scheduled mining skipped: {e:?}");
            }
        }
    })
}
