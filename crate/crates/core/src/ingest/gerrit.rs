//! Gerrit-style REST adapter.
//!
//! Fetching ([`GerritClient`]) produces a [`GerritSnapshot`] of raw wire
//! payloads; [`to_dump`] is the single function mapping those payloads into a
//! [`ReviewDump`]. Other review tools plug in by producing a dump themselves.
//!
//! All Gerrit responses carry the `)]}'` XSSI prefix, which is stripped before
//! decoding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Duration;

use chrono::{NaiveDateTime, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::model::{
    validate_change, ChangeStatus, CommentThread, Developer, FileDiff, Patchset, Project,
    ReviewChange, ReviewComment, Timestamp,
};

use super::ReviewDump;

const XSSI_PREFIX: &str = ")]}'";
const GERRIT_TS_FMT: &str = "%Y-%m-%d %H:%M:%S%.f";
const CONTEXT_RADIUS: u32 = 5;
const MAX_ATTEMPTS: u32 = 4;

pub const DEFAULT_PASSWORD_ENV: &str = "CRA_GERRIT_PASSWORD";

/// Connection settings for one review server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub base_url: String,
    #[serde(default)]
    pub username: Option<String>,
    /// Name of the environment variable holding the HTTP password.
    #[serde(default = "default_password_env")]
    pub password_env: String,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_secs: u64,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_password_env() -> String {
    DEFAULT_PASSWORD_ENV.to_string()
}
fn default_poll_interval() -> u64 {
    3600
}
fn default_page_size() -> usize {
    100
}
fn default_backoff_ms() -> u64 {
    250
}

impl MinerConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        MinerConfig {
            base_url: base_url.into(),
            username: None,
            password_env: default_password_env(),
            poll_interval_secs: default_poll_interval(),
            page_size: default_page_size(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MineError {
    #[error("authentication rejected by {0}")]
    AuthFailure(String),
    #[error("network failure after {attempts} attempts: {message}")]
    NetworkFailure { attempts: u32, message: String },
    #[error("unrecognized payload from {url}: {message}")]
    SchemaMismatch { url: String, message: String },
    #[error("a mining run is already in progress")]
    AlreadyRunning,
    #[error("invalid miner configuration: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountInfo {
    #[serde(rename = "_account_id")]
    pub account_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionInfo {
    #[serde(rename = "_number")]
    pub number: u32,
    pub created: String,
    #[serde(default)]
    pub files: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeInfo {
    pub id: String,
    pub project: String,
    #[serde(rename = "_number")]
    pub number: u64,
    pub owner: AccountInfo,
    pub created: String,
    pub updated: String,
    pub status: String,
    #[serde(default)]
    pub revisions: BTreeMap<String, RevisionInfo>,
    #[serde(rename = "_more_changes", default, skip_serializing_if = "Option::is_none")]
    pub more_changes: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentInfo {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_set: Option<u32>,
    pub author: AccountInfo,
    pub updated: String,
    #[serde(default)]
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_reply_to: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffContent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffInfo {
    pub content: Vec<DiffContent>,
}

/// Post-image lines and changed line numbers of one diff.
struct PostImage {
    /// `None` where the diff skipped common lines.
    lines: Vec<Option<String>>,
    changed: BTreeSet<u32>,
}

impl DiffInfo {
    fn post_image(&self) -> PostImage {
        let mut lines = Vec::new();
        let mut changed = BTreeSet::new();
        for chunk in &self.content {
            if let Some(ab) = &chunk.ab {
                lines.extend(ab.iter().cloned().map(Some));
            }
            if let Some(skip) = chunk.skip {
                lines.extend(std::iter::repeat(None).take(skip as usize));
            }
            match (&chunk.a, &chunk.b) {
                (_, Some(b)) => {
                    for text in b {
                        lines.push(Some(text.clone()));
                        changed.insert(lines.len() as u32);
                    }
                }
                // A pure deletion marks the post-image line that now sits
                // where the removed text was.
                (Some(_), None) => {
                    changed.insert(lines.len() as u32 + 1);
                }
                (None, None) => {}
            }
        }
        PostImage { lines, changed }
    }
}

/// Everything fetched for one change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GerritChange {
    pub info: ChangeInfo,
    /// Published inline comments keyed by file path.
    pub comments: BTreeMap<String, Vec<CommentInfo>>,
    /// Diffs keyed by patchset number, then file path. Patchset `n > 1` is
    /// diffed against patchset `n - 1`.
    pub diffs: BTreeMap<u32, BTreeMap<String, DiffInfo>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GerritSnapshot {
    pub changes: Vec<GerritChange>,
}

pub fn parse_gerrit_time(raw: &str) -> Result<Timestamp, String> {
    NaiveDateTime::parse_from_str(raw, GERRIT_TS_FMT)
        .map(|t| crate::model::to_seconds(t.and_utc()))
        .map_err(|e| format!("bad gerrit timestamp {raw:?}: {e}"))
}

pub fn format_gerrit_time(ts: &Timestamp) -> String {
    ts.format("%Y-%m-%d %H:%M:%S%.9f").to_string()
}

fn developer(account: &AccountInfo) -> Developer {
    let display_name = account
        .name
        .clone()
        .or_else(|| account.username.clone())
        .or_else(|| account.email.clone())
        .unwrap_or_else(|| format!("account {}", account.account_id));
    Developer {
        developer_id: account.account_id.to_string(),
        display_name,
    }
}

// ---------------------------------------------------------------------------
// Adapter boundary
// ---------------------------------------------------------------------------

/// Maps fetched Gerrit payloads onto the canonical dump.
///
/// File-level comments (no line) are not inline comments and are skipped, as
/// are threads that would break a model invariant; both are logged.
pub fn to_dump(snapshot: &GerritSnapshot) -> Result<ReviewDump, MineError> {
    let mismatch = |id: &str, message: String| MineError::SchemaMismatch {
        url: format!("change {id}"),
        message,
    };
    let mut developers: BTreeMap<String, Developer> = BTreeMap::new();
    let mut projects: BTreeMap<String, Project> = BTreeMap::new();
    let mut changes = Vec::new();

    for gc in &snapshot.changes {
        let info = &gc.info;
        let change_id = info.number.to_string();
        let status = match info.status.as_str() {
            "NEW" => ChangeStatus::Open,
            "MERGED" => ChangeStatus::Merged,
            "ABANDONED" => ChangeStatus::Abandoned,
            other => return Err(mismatch(&change_id, format!("unknown status {other:?}"))),
        };
        let owner = developer(&info.owner);
        developers.insert(owner.developer_id.clone(), owner);
        projects
            .entry(info.project.clone())
            .or_insert_with(|| Project {
                project_id: info.project.clone(),
                name: info.project.clone(),
            });

        let mut revisions: Vec<&RevisionInfo> = info.revisions.values().collect();
        revisions.sort_by_key(|r| r.number);
        let mut patchsets = Vec::new();
        let mut images: HashMap<(u32, &str), PostImage> = HashMap::new();
        for rev in revisions {
            let uploaded_at = parse_gerrit_time(&rev.created).map_err(|e| mismatch(&change_id, e))?;
            let mut files = Vec::new();
            if let Some(diffs) = gc.diffs.get(&rev.number) {
                for (path, diff) in diffs {
                    let image = diff.post_image();
                    files.push(FileDiff {
                        path: path.clone(),
                        changed_new_lines: image.changed.clone(),
                    });
                    images.insert((rev.number, path.as_str()), image);
                }
            }
            patchsets.push(Patchset {
                number: rev.number,
                uploaded_at,
                files,
            });
        }

        // Group comments into threads by following `in_reply_to` to the root.
        let mut by_id: HashMap<&str, (&str, &CommentInfo)> = HashMap::new();
        for (path, list) in &gc.comments {
            for c in list {
                by_id.insert(c.id.as_str(), (path.as_str(), c));
            }
        }
        fn root_of<'a>(by_id: &HashMap<&'a str, (&'a str, &'a CommentInfo)>, mut id: &'a str) -> &'a str {
            let mut hops = 0;
            while let Some(parent) = by_id.get(id).and_then(|(_, c)| c.in_reply_to.as_deref()) {
                if !by_id.contains_key(parent) || hops > by_id.len() {
                    break;
                }
                id = parent;
                hops += 1;
            }
            id
        }
        let mut threads: BTreeMap<&str, Vec<&CommentInfo>> = BTreeMap::new();
        for (id, _) in by_id.iter() {
            threads.entry(root_of(&by_id, id)).or_default().push(by_id[id].1);
        }

        let mut built = Vec::new();
        for (root_id, members) in threads {
            let (path, root) = by_id[root_id];
            let (Some(line), Some(origin)) = (root.line, root.patch_set) else {
                tracing::debug!(change = %change_id, comment = root_id, "skipping file-level thread");
                continue;
            };
            let mut comments = Vec::new();
            for c in members {
                let written_at = parse_gerrit_time(&c.updated).map_err(|e| mismatch(&change_id, e))?;
                let author = developer(&c.author);
                developers.insert(author.developer_id.clone(), author.clone());
                let patchset_number = c.patch_set.unwrap_or(origin);
                let code_context = images
                    .get(&(patchset_number, path))
                    .and_then(|img| context_snippet(&img.lines, line));
                comments.push(ReviewComment {
                    comment_id: c.id.clone(),
                    thread_id: root_id.to_string(),
                    author_id: author.developer_id,
                    written_at,
                    text: c.message.clone(),
                    patchset_number,
                    code_context,
                });
            }
            comments.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
            built.push(CommentThread {
                thread_id: root_id.to_string(),
                file_path: path.to_string(),
                line,
                origin_patchset: origin,
                comments,
            });
        }

        let mut change = ReviewChange {
            change_id: change_id.clone(),
            project_id: info.project.clone(),
            author_id: info.owner.account_id.to_string(),
            created_at: parse_gerrit_time(&info.created).map_err(|e| mismatch(&change_id, e))?,
            status,
            patchsets,
            threads: Vec::new(),
        };
        for thread in built {
            change.threads.push(thread);
            let violations = validate_change(&change);
            if violations.iter().any(|v| v.field.starts_with(&format!("threads[{}]", change.threads.len() - 1))) {
                let dropped = change.threads.pop().expect("just pushed");
                tracing::warn!(change = %change_id, thread = %dropped.thread_id, ?violations, "dropping malformed thread");
            }
        }
        let violations = validate_change(&change);
        if !violations.is_empty() {
            return Err(mismatch(
                &change_id,
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ));
        }
        changes.push(change);
    }

    changes.sort_by(|a: &ReviewChange, b| a.change_id.cmp(&b.change_id));
    let dump = ReviewDump {
        format_version: super::FORMAT_VERSION,
        developers: developers.into_values().collect(),
        projects: projects.into_values().collect(),
        changes,
    };
    dump.validate().map_err(|e| MineError::SchemaMismatch {
        url: "snapshot".into(),
        message: e.to_string(),
    })?;
    Ok(dump)
}

fn context_snippet(lines: &[Option<String>], line: u32) -> Option<String> {
    if line == 0 || lines.is_empty() {
        return None;
    }
    let center = line as usize;
    let start = center.saturating_sub(CONTEXT_RADIUS as usize).max(1);
    let end = (center + CONTEXT_RADIUS as usize - 1).min(lines.len());
    if start > end {
        return None;
    }
    let snippet: Vec<&str> = lines[start - 1..end]
        .iter()
        .filter_map(|l| l.as_deref())
        .collect();
    (!snippet.is_empty()).then(|| snippet.join("\n"))
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

/// HTTP client bound to one Gerrit instance.
pub struct GerritClient {
    config: MinerConfig,
    http: reqwest::Client,
    auth: Option<(String, String)>,
}

impl GerritClient {
    /// Builds a client, reading the password from the configured environment
    /// variable when a username is set.
    pub fn new(config: MinerConfig) -> Result<Self, MineError> {
        let auth = match &config.username {
            Some(user) => {
                let password = std::env::var(&config.password_env).map_err(|_| {
                    MineError::AuthFailure(format!(
                        "credential variable {} is not set",
                        config.password_env
                    ))
                })?;
                Some((user.clone(), password))
            }
            None => None,
        };
        url::Url::parse(&config.base_url).map_err(|e| MineError::Config(format!("base_url: {e}")))?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| MineError::Config(e.to_string()))?;
        Ok(GerritClient { config, http, auth })
    }

    fn url(&self, path: &str) -> String {
        let base = self.config.base_url.trim_end_matches('/');
        let prefix = if self.auth.is_some() { "/a" } else { "" };
        format!("{base}{prefix}{path}")
    }

    async fn get_json<T: DeserializeOwned>(&self, url: &str) -> Result<T, MineError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self.http.get(url);
            if let Some((user, pass)) = &self.auth {
                req = req.basic_auth(user, Some(pass));
            }
            let failure = match req.send().await {
                Ok(resp) => {
                    let status = resp.status();
                    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
                        return Err(MineError::AuthFailure(self.config.base_url.clone()));
                    }
                    if status.is_success() {
                        let body = resp.text().await.map_err(|e| MineError::NetworkFailure {
                            attempts: attempt,
                            message: e.to_string(),
                        })?;
                        let json = body.strip_prefix(XSSI_PREFIX).unwrap_or(&body);
                        return serde_json::from_str(json).map_err(|e| MineError::SchemaMismatch {
                            url: url.to_string(),
                            message: e.to_string(),
                        });
                    }
                    if status.is_client_error() {
                        return Err(MineError::SchemaMismatch {
                            url: url.to_string(),
                            message: format!("HTTP {status}"),
                        });
                    }
                    format!("HTTP {status}")
                }
                Err(e) => e.to_string(),
            };
            if attempt >= MAX_ATTEMPTS {
                return Err(MineError::NetworkFailure {
                    attempts: attempt,
                    message: failure,
                });
            }
            let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1));
            tracing::warn!(%url, attempt, delay_ms = delay, "retrying: {failure}");
            tokio::time::sleep(Duration::from_millis(delay)).await;
        }
    }

    /// Fetches every change updated at or after `since`, with comments and
    /// per-patchset diffs.
    pub async fn fetch_since(&self, since: Timestamp) -> Result<GerritSnapshot, MineError> {
        let query = format!("since:\"{}\"", since.format("%Y-%m-%d %H:%M:%S"));
        let mut infos: Vec<ChangeInfo> = Vec::new();
        let mut offset = 0usize;
        loop {
            let mut url = url::Url::parse(&self.url("/changes/")).map_err(|e| MineError::Config(e.to_string()))?;
            url.query_pairs_mut()
                .append_pair("q", &query)
                .append_pair("o", "ALL_REVISIONS")
                .append_pair("o", "ALL_FILES")
                .append_pair("o", "DETAILED_ACCOUNTS")
                .append_pair("n", &self.config.page_size.to_string())
                .append_pair("S", &offset.to_string());
            let page: Vec<ChangeInfo> = self.get_json(url.as_str()).await?;
            let more = page.last().and_then(|c| c.more_changes).unwrap_or(false);
            offset += page.len();
            infos.extend(page);
            if !more {
                break;
            }
        }

        // The server-side query is a hint; filter again on our side.
        let mut changes = Vec::new();
        for mut info in infos {
            let updated = parse_gerrit_time(&info.updated).map_err(|message| MineError::SchemaMismatch {
                url: format!("change {}", info.number),
                message,
            })?;
            if updated < since {
                continue;
            }
            info.more_changes = None;
            let comments: BTreeMap<String, Vec<CommentInfo>> = self
                .get_json(&self.url(&format!("/changes/{}/comments", info.number)))
                .await?;
            let mut diffs: BTreeMap<u32, BTreeMap<String, DiffInfo>> = BTreeMap::new();
            let mut revs: Vec<(&String, &RevisionInfo)> = info.revisions.iter().collect();
            revs.sort_by_key(|(_, r)| r.number);
            let mut prev: Option<u32> = None;
            for (sha, rev) in revs {
                for path in rev.files.keys() {
                    let mut url = url::Url::parse(&self.url(&format!("/changes/{}/revisions/{}/files/", info.number, sha)))
                        .map_err(|e| MineError::Config(e.to_string()))?;
                    url.path_segments_mut()
                        .map_err(|_| MineError::Config("base_url cannot be a base".into()))?
                        .pop_if_empty()
                        .push(path)
                        .push("diff");
                    url.query_pairs_mut().append_pair("context", "ALL");
                    if let Some(p) = prev {
                        url.query_pairs_mut().append_pair("base", &p.to_string());
                    }
                    let diff: DiffInfo = self.get_json(url.as_str()).await?;
                    diffs.entry(rev.number).or_default().insert(path.clone(), diff);
                }
                prev = Some(rev.number);
            }
            changes.push(GerritChange { info, comments, diffs });
        }
        Ok(GerritSnapshot { changes })
    }
}

/// Result of one incremental mining run.
#[derive(Debug, Clone)]
pub struct MineOutcome {
    pub dump: ReviewDump,
    /// Latest `updated` time seen; the next run starts here. Equals `since`
    /// when nothing new arrived.
    pub high_water_mark: Timestamp,
}

/// Downloads changes updated at or after `since` and maps them to a dump.
pub async fn mine_incremental(config: &MinerConfig, since: Timestamp) -> Result<MineOutcome, MineError> {
    let client = GerritClient::new(config.clone())?;
    let snapshot = client.fetch_since(since).await?;
    let mut high_water_mark = since;
    for c in &snapshot.changes {
        if let Ok(t) = parse_gerrit_time(&c.info.updated) {
            high_water_mark = high_water_mark.max(t);
        }
    }
    let dump = to_dump(&snapshot)?;
    Ok(MineOutcome { dump, high_water_mark })
}

/// Single-flight guard: at most one run per miner at a time; overlapping
/// invocations are rejected with [`MineError::AlreadyRunning`].
#[derive(Clone, Default)]
pub struct Miner {
    lock: Arc<Mutex<()>>,
}

impl Miner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_running(&self) -> bool {
        self.lock.try_lock().is_err()
    }

    /// Holds the run slot for the lifetime of the returned guard.
    pub fn try_begin(&self) -> Result<tokio::sync::OwnedMutexGuard<()>, MineError> {
        self.lock.clone().try_lock_owned().map_err(|_| MineError::AlreadyRunning)
    }

    pub async fn run(&self, config: &MinerConfig, since: Timestamp) -> Result<MineOutcome, MineError> {
        let _guard = self.try_begin()?;
        mine_incremental(config, since).await
    }
}

/// Epoch start, for a first full fetch.
pub fn epoch() -> Timestamp {
    chrono::DateTime::<Utc>::UNIX_EPOCH
}
