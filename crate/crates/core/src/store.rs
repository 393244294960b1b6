//! Embedded SQLite persistence for review histories, predictions, labels,
//! model artifacts and miner state.
//!
//! Writes go through one connection behind a mutex. Reads borrow a pooled
//! connection and run inside a transaction, so each read sees one snapshot
//! even while a dump import is in progress (the database runs in WAL mode).

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Months;
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{ReviewDump, FORMAT_VERSION};
use crate::model::{
    timestamp, CommentCategory, Developer, Project, ReviewChange, ReviewComment, Timestamp, UsefulnessLabel,
};

pub const SCHEMA_VERSION: i64 = 1;
pub const LABEL_WINDOW_MONTHS: u32 = 4;
pub const LABEL_MIN_COMMENTS: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    StorageFailure(#[from] rusqlite::Error),
    #[error("stored record is corrupt: {0}")]
    Corrupt(String),
    #[error("store schema version {found} is newer than supported version {SCHEMA_VERSION}")]
    UnsupportedSchema { found: i64 },
    #[error("rater {rater_id:?} did not author the change of comment {comment_id:?}")]
    NotChangeAuthor { rater_id: String, comment_id: String },
    #[error("unknown comment {0:?}")]
    UnknownComment(String),
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Corrupt(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertCounts {
    pub inserted: usize,
    pub updated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPrediction {
    pub comment_id: String,
    pub model_version: String,
    pub useful: bool,
    pub probability: f64,
    #[serde(with = "timestamp")]
    pub predicted_at: Timestamp,
}

/// A comment awaiting its change author's verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingItem {
    pub change_id: String,
    pub project_id: String,
    pub file_path: String,
    pub line: u32,
    pub comment: ReviewComment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelProgress {
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub comment_id: String,
    pub rater_id: String,
    pub old_is_useful: bool,
    pub old_category: CommentCategory,
    #[serde(with = "timestamp")]
    pub old_labeled_at: Timestamp,
    #[serde(with = "timestamp")]
    pub replaced_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_version: String,
    pub algorithm: String,
    #[serde(with = "timestamp")]
    pub stored_at: Timestamp,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS developers (
    developer_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    project_id TEXT PRIMARY KEY,
    name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS changes (
    change_id TEXT PRIMARY KEY,
    project_id TEXT NOT NULL REFERENCES projects(project_id),
    author_id TEXT NOT NULL REFERENCES developers(developer_id),
    created_at TEXT NOT NULL,
    payload TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS comments (
    comment_id TEXT PRIMARY KEY,
    change_id TEXT NOT NULL REFERENCES changes(change_id) ON DELETE CASCADE,
    thread_id TEXT NOT NULL,
    author_id TEXT NOT NULL REFERENCES developers(developer_id),
    written_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS comments_by_change ON comments(change_id);
CREATE INDEX IF NOT EXISTS comments_by_time ON comments(written_at);
CREATE TABLE IF NOT EXISTS predictions (
    comment_id TEXT NOT NULL REFERENCES comments(comment_id) ON DELETE CASCADE,
    model_version TEXT NOT NULL,
    label INTEGER NOT NULL,
    probability REAL NOT NULL,
    predicted_at TEXT NOT NULL,
    PRIMARY KEY (comment_id, model_version)
);
CREATE TABLE IF NOT EXISTS labels (
    comment_id TEXT NOT NULL REFERENCES comments(comment_id) ON DELETE CASCADE,
    rater_id TEXT NOT NULL REFERENCES developers(developer_id),
    is_useful INTEGER NOT NULL,
    category TEXT NOT NULL,
    labeled_at TEXT NOT NULL,
    PRIMARY KEY (comment_id, rater_id)
);
CREATE TABLE IF NOT EXISTS label_audit (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    comment_id TEXT NOT NULL,
    rater_id TEXT NOT NULL,
    old_is_useful INTEGER NOT NULL,
    old_category TEXT NOT NULL,
    old_labeled_at TEXT NOT NULL,
    replaced_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS models (
    model_version TEXT PRIMARY KEY,
    algorithm TEXT NOT NULL,
    stored_at TEXT NOT NULL,
    artifact BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS miner_state (
    endpoint TEXT PRIMARY KEY,
    high_water_mark TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS settings (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
";

pub struct Store {
    path: PathBuf,
    writer: Mutex<Connection>,
    readers: Mutex<Vec<Connection>>,
}

fn ts(t: &Timestamp) -> String {
    timestamp::format(t)
}

fn parse_ts(raw: &str) -> Result<Timestamp, StoreError> {
    timestamp::parse(raw).map_err(StoreError::Corrupt)
}

fn parse_category(raw: &str) -> Result<CommentCategory, StoreError> {
    raw.parse().map_err(|e: crate::model::UnknownCategory| StoreError::Corrupt(e.to_string()))
}

fn configure(conn: &Connection) -> Result<(), StoreError> {
    conn.busy_timeout(std::time::Duration::from_secs(10))?;
    conn.pragma_update(None, "foreign_keys", true)?;
    Ok(())
}

impl Store {
    /// Opens or creates the store at `path`, applying schema migrations.
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let conn = Connection::open(path)?;
        configure(&conn)?;
        conn.pragma_update(None, "journal_mode", "wal")?;
        let found: i64 = conn.pragma_query_value(None, "user_version", |r| r.get(0))?;
        if found > SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema { found });
        }
        if found < SCHEMA_VERSION {
            conn.execute_batch(SCHEMA)?;
            conn.pragma_update(None, "user_version", SCHEMA_VERSION)?;
        }
        Ok(Store {
            path: path.to_path_buf(),
            writer: Mutex::new(conn),
            readers: Mutex::new(Vec::new()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut conn = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let tx = conn.transaction_with_behavior(rusqlite::TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&Transaction) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let pooled = self.readers.lock().unwrap_or_else(|e| e.into_inner()).pop();
        let mut conn = match pooled {
            Some(c) => c,
            None => {
                let c = Connection::open(&self.path)?;
                configure(&c)?;
                c
            }
        };
        let result = (|| {
            let tx = conn.transaction()?;
            let out = f(&tx)?;
            tx.finish()?;
            Ok(out)
        })();
        self.readers.lock().unwrap_or_else(|e| e.into_inner()).push(conn);
        result
    }

    /// Inserts new changes and replaces changed ones; a change counts as
    /// updated only when its content differs from the stored copy. Comments
    /// that disappear from an updated change are removed together with their
    /// predictions and labels.
    pub fn upsert_dump(&self, dump: &ReviewDump) -> Result<UpsertCounts, StoreError> {
        self.write(|tx| {
            for d in &dump.developers {
                tx.execute(
                    "INSERT INTO developers (developer_id, display_name) VALUES (?1, ?2)
                     ON CONFLICT(developer_id) DO UPDATE SET display_name = excluded.display_name",
                    params![d.developer_id, d.display_name],
                )?;
            }
            for p in &dump.projects {
                tx.execute(
                    "INSERT INTO projects (project_id, name) VALUES (?1, ?2)
                     ON CONFLICT(project_id) DO UPDATE SET name = excluded.name",
                    params![p.project_id, p.name],
                )?;
            }
            let mut counts = UpsertCounts::default();
            for change in &dump.changes {
                let payload = serde_json::to_string(change)?;
                let existing: Option<String> = tx
                    .query_row("SELECT payload FROM changes WHERE change_id = ?1", [&change.change_id], |r| r.get(0))
                    .optional()?;
                match existing {
                    Some(old) if old == payload => continue,
                    Some(_) => {
                        counts.updated += 1;
                        tx.execute(
                            "UPDATE changes SET project_id = ?2, author_id = ?3, created_at = ?4, payload = ?5
                             WHERE change_id = ?1",
                            params![change.change_id, change.project_id, change.author_id, ts(&change.created_at), payload],
                        )?;
                    }
                    None => {
                        counts.inserted += 1;
                        tx.execute(
                            "INSERT INTO changes (change_id, project_id, author_id, created_at, payload)
                             VALUES (?1, ?2, ?3, ?4, ?5)",
                            params![change.change_id, change.project_id, change.author_id, ts(&change.created_at), payload],
                        )?;
                    }
                }
                let ids: Vec<&str> = change.comments().map(|(_, c)| c.comment_id.as_str()).collect();
                let stale: Vec<String> = {
                    let mut stmt = tx.prepare_cached("SELECT comment_id FROM comments WHERE change_id = ?1")?;
                    let rows = stmt.query_map([&change.change_id], |r| r.get::<_, String>(0))?;
                    rows.collect::<Result<Vec<_>, _>>()?
                        .into_iter()
                        .filter(|id| !ids.contains(&id.as_str()))
                        .collect()
                };
                for id in stale {
                    tx.execute("DELETE FROM comments WHERE comment_id = ?1", [id])?;
                }
                let mut stmt = tx.prepare_cached(
                    "INSERT INTO comments (comment_id, change_id, thread_id, author_id, written_at)
                     VALUES (?1, ?2, ?3, ?4, ?5)
                     ON CONFLICT(comment_id) DO UPDATE SET change_id = excluded.change_id,
                        thread_id = excluded.thread_id, author_id = excluded.author_id,
                        written_at = excluded.written_at",
                )?;
                for (_, c) in change.comments() {
                    stmt.execute(params![c.comment_id, change.change_id, c.thread_id, c.author_id, ts(&c.written_at)])?;
                }
            }
            Ok(counts)
        })
    }

    /// The full stored history as a dump.
    pub fn load_dump(&self) -> Result<ReviewDump, StoreError> {
        self.read(|tx| {
            let developers = {
                let mut stmt = tx.prepare("SELECT developer_id, display_name FROM developers ORDER BY developer_id")?;
                let rows = stmt.query_map([], |r| {
                    Ok(Developer {
                        developer_id: r.get(0)?,
                        display_name: r.get(1)?,
                    })
                })?;
                rows.collect::<Result<Vec<_>, _>>()?
            };
            let projects = {
                let mut stmt = tx.prepare("SELECT project_id, name FROM projects ORDER BY project_id")?;
                let rows = stmt.query_map([], |r| {
                    Ok(Project {
                        project_id: r.get(0)?,
                        name: r.get(1)?,
                    })
                })?;
                rows.collect::<Result<Vec<_>, _>>()?
            };
            let changes = load_changes(tx, "SELECT payload FROM changes ORDER BY created_at, change_id", [])?;
            Ok(ReviewDump {
                format_version: FORMAT_VERSION,
                developers,
                projects,
                changes,
            })
        })
    }

    /// Changes with at least one comment written in `[from, to)`, together
    /// with the comment verdicts, read from a single snapshot.
    pub fn activity(
        &self,
        from: Timestamp,
        to: Timestamp,
    ) -> Result<(Vec<ReviewChange>, HashMap<String, bool>), StoreError> {
        self.read(|tx| {
            let changes = load_changes(
                tx,
                "SELECT payload FROM changes WHERE change_id IN
                    (SELECT DISTINCT change_id FROM comments WHERE written_at >= ?1 AND written_at < ?2)
                 ORDER BY created_at, change_id",
                params![ts(&from), ts(&to)],
            )?;
            Ok((changes, verdicts_in(tx)?))
        })
    }

    /// One verdict per comment: a label if the author gave one, otherwise the
    /// most recent prediction.
    pub fn verdicts(&self) -> Result<HashMap<String, bool>, StoreError> {
        self.read(verdicts_in)
    }

    pub fn developer_exists(&self, id: &str) -> Result<bool, StoreError> {
        self.read(|tx| Ok(tx.query_row("SELECT 1 FROM developers WHERE developer_id = ?1", [id], |_| Ok(())).optional()?.is_some()))
    }

    pub fn project_exists(&self, id: &str) -> Result<bool, StoreError> {
        self.read(|tx| Ok(tx.query_row("SELECT 1 FROM projects WHERE project_id = ?1", [id], |_| Ok(())).optional()?.is_some()))
    }

    /// Earliest and latest comment times, if any comment is stored.
    pub fn comment_span(&self) -> Result<Option<(Timestamp, Timestamp)>, StoreError> {
        self.read(|tx| {
            let (lo, hi): (Option<String>, Option<String>) =
                tx.query_row("SELECT MIN(written_at), MAX(written_at) FROM comments", [], |r| Ok((r.get(0)?, r.get(1)?)))?;
            match (lo, hi) {
                (Some(lo), Some(hi)) => Ok(Some((parse_ts(&lo)?, parse_ts(&hi)?))),
                _ => Ok(None),
            }
        })
    }

    pub fn put_predictions(&self, predictions: &[StoredPrediction]) -> Result<usize, StoreError> {
        self.write(|tx| {
            let mut stmt = tx.prepare_cached(
                "INSERT INTO predictions (comment_id, model_version, label, probability, predicted_at)
                 VALUES (?1, ?2, ?3, ?4, ?5)
                 ON CONFLICT(comment_id, model_version) DO UPDATE SET label = excluded.label,
                    probability = excluded.probability, predicted_at = excluded.predicted_at",
            )?;
            for p in predictions {
                let n = stmt.execute(params![p.comment_id, p.model_version, p.useful, p.probability, ts(&p.predicted_at)]);
                match n {
                    Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == rusqlite::ErrorCode::ConstraintViolation => {
                        return Err(StoreError::UnknownComment(p.comment_id.clone()))
                    }
                    other => {
                        other?;
                    }
                }
            }
            Ok(predictions.len())
        })
    }

    pub fn predictions(&self, comment_id: &str) -> Result<Vec<StoredPrediction>, StoreError> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT comment_id, model_version, label, probability, predicted_at FROM predictions
                 WHERE comment_id = ?1 ORDER BY predicted_at, model_version",
            )?;
            let rows = stmt.query_map([comment_id], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, bool>(2)?, r.get::<_, f64>(3)?, r.get::<_, String>(4)?))
            })?;
            rows.map(|row| {
                let (comment_id, model_version, useful, probability, at) = row?;
                Ok(StoredPrediction {
                    comment_id,
                    model_version,
                    useful,
                    probability,
                    predicted_at: parse_ts(&at)?,
                })
            })
            .collect()
        })
    }

    /// Review comments (not written by the change author) with neither a
    /// label nor a prediction from `model_version`, as (change id, comment id).
    pub fn unpredicted(&self, model_version: &str) -> Result<Vec<(String, String)>, StoreError> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT c.change_id, c.comment_id FROM comments c JOIN changes ch ON ch.change_id = c.change_id
                 WHERE c.author_id <> ch.author_id
                   AND NOT EXISTS (SELECT 1 FROM labels l WHERE l.comment_id = c.comment_id)
                   AND NOT EXISTS (SELECT 1 FROM predictions p
                                   WHERE p.comment_id = c.comment_id AND p.model_version = ?1)
                 ORDER BY c.written_at, c.comment_id",
            )?;
            let rows = stmt.query_map([model_version], |r| Ok((r.get(0)?, r.get(1)?)))?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })
    }

    pub fn change(&self, change_id: &str) -> Result<Option<ReviewChange>, StoreError> {
        self.read(|tx| Ok(load_changes(tx, "SELECT payload FROM changes WHERE change_id = ?1", [change_id])?.pop()))
    }

    /// Stores or overwrites a label. The rater must be the author of the
    /// comment's change; an overwrite keeps the previous verdict in the audit
    /// trail. Returns whether an earlier label was replaced.
    pub fn submit_label(&self, label: &UsefulnessLabel, now: Timestamp) -> Result<bool, StoreError> {
        self.write(|tx| submit_in(tx, label, now))
    }

    /// Submits many labels in one transaction; any failure rolls back all.
    pub fn import_labels(&self, labels: &[UsefulnessLabel], now: Timestamp) -> Result<usize, StoreError> {
        self.write(|tx| {
            for l in labels {
                submit_in(tx, l, now)?;
            }
            Ok(labels.len())
        })
    }

    pub fn labels(&self) -> Result<Vec<UsefulnessLabel>, StoreError> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT comment_id, rater_id, is_useful, category, labeled_at FROM labels ORDER BY comment_id, rater_id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, bool>(2)?, r.get::<_, String>(3)?, r.get::<_, String>(4)?))
            })?;
            rows.map(|row| {
                let (comment_id, rater_id, is_useful, category, at) = row?;
                Ok(UsefulnessLabel {
                    comment_id,
                    rater_id,
                    is_useful,
                    category: parse_category(&category)?,
                    labeled_at: parse_ts(&at)?,
                })
            })
            .collect()
        })
    }

    pub fn label_count(&self) -> Result<usize, StoreError> {
        self.read(|tx| Ok(tx.query_row("SELECT COUNT(*) FROM labels", [], |r| r.get::<_, i64>(0))? as usize))
    }

    pub fn label_audit(&self, comment_id: &str) -> Result<Vec<AuditRow>, StoreError> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT comment_id, rater_id, old_is_useful, old_category, old_labeled_at, replaced_at
                 FROM label_audit WHERE comment_id = ?1 ORDER BY id",
            )?;
            let rows = stmt.query_map([comment_id], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, bool>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                ))
            })?;
            rows.map(|row| {
                let (comment_id, rater_id, old_is_useful, cat, old_at, replaced) = row?;
                Ok(AuditRow {
                    comment_id,
                    rater_id,
                    old_is_useful,
                    old_category: parse_category(&cat)?,
                    old_labeled_at: parse_ts(&old_at)?,
                    replaced_at: parse_ts(&replaced)?,
                })
            })
            .collect()
        })
    }

    /// Developers whose changes received at least `min_comments` review
    /// comments from others during the `months` before `now`.
    pub fn eligible_labelers(&self, now: Timestamp, months: u32, min_comments: usize) -> Result<Vec<String>, StoreError> {
        let from = now.checked_sub_months(Months::new(months)).unwrap_or(now);
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT ch.author_id FROM comments c JOIN changes ch ON ch.change_id = c.change_id
                 WHERE c.author_id <> ch.author_id AND c.written_at >= ?1 AND c.written_at < ?2
                 GROUP BY ch.author_id HAVING COUNT(*) >= ?3 ORDER BY ch.author_id",
            )?;
            let rows = stmt.query_map(params![ts(&from), ts(&now), min_comments as i64], |r| r.get(0))?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })
    }

    /// The next comment on one of the rater's changes that they have not
    /// labeled yet. The order is a hash of `session_seed`, rater and comment
    /// id: random-looking, but stable for a session.
    pub fn next_unlabeled(&self, rater_id: &str, session_seed: u64) -> Result<Option<LabelingItem>, StoreError> {
        self.read(|tx| {
            let candidates: Vec<(String, String)> = {
                let mut stmt = tx.prepare(
                    "SELECT c.comment_id, c.change_id FROM comments c JOIN changes ch ON ch.change_id = c.change_id
                     WHERE ch.author_id = ?1 AND c.author_id <> ?1
                       AND NOT EXISTS (SELECT 1 FROM labels l WHERE l.comment_id = c.comment_id AND l.rater_id = ?1)",
                )?;
                let rows = stmt.query_map([rater_id], |r| Ok((r.get(0)?, r.get(1)?)))?;
                rows.collect::<Result<Vec<_>, _>>()?
            };
            let key = |id: &str| {
                let mut h = Sha256::new();
                h.update(session_seed.to_le_bytes());
                h.update(rater_id.as_bytes());
                h.update([0]);
                h.update(id.as_bytes());
                h.finalize()
            };
            let Some((comment_id, change_id)) = candidates.into_iter().min_by_key(|(id, _)| key(id)) else {
                return Ok(None);
            };
            let change = load_changes(tx, "SELECT payload FROM changes WHERE change_id = ?1", [&change_id])?
                .pop()
                .ok_or_else(|| StoreError::Corrupt(format!("comment {comment_id} without change")))?;
            let (thread, comment) = change
                .locate(&comment_id)
                .ok_or_else(|| StoreError::Corrupt(format!("comment {comment_id} missing from its change")))?;
            Ok(Some(LabelingItem {
                change_id: change.change_id.clone(),
                project_id: change.project_id.clone(),
                file_path: thread.file_path.clone(),
                line: thread.line,
                comment: comment.clone(),
            }))
        })
    }

    pub fn label_progress(&self, rater_id: &str) -> Result<LabelProgress, StoreError> {
        self.read(|tx| {
            let (total, labeled): (i64, i64) = tx.query_row(
                "SELECT COUNT(*),
                        COALESCE(SUM(EXISTS (SELECT 1 FROM labels l WHERE l.comment_id = c.comment_id AND l.rater_id = ?1)), 0)
                 FROM comments c JOIN changes ch ON ch.change_id = c.change_id
                 WHERE ch.author_id = ?1 AND c.author_id <> ?1",
                [rater_id],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )?;
            Ok(LabelProgress {
                labeled: labeled as usize,
                total: total as usize,
            })
        })
    }

    pub fn save_model(&self, version: &str, algorithm: &str, artifact: &[u8], now: Timestamp) -> Result<(), StoreError> {
        self.write(|tx| {
            tx.execute(
                "INSERT INTO models (model_version, algorithm, stored_at, artifact) VALUES (?1, ?2, ?3, ?4)
                 ON CONFLICT(model_version) DO NOTHING",
                params![version, algorithm, ts(&now), artifact],
            )?;
            Ok(())
        })
    }

    pub fn models(&self) -> Result<Vec<ModelRecord>, StoreError> {
        self.read(|tx| {
            let mut stmt = tx.prepare("SELECT model_version, algorithm, stored_at FROM models ORDER BY stored_at, model_version")?;
            let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?)))?;
            rows.map(|row| {
                let (model_version, algorithm, at) = row?;
                Ok(ModelRecord {
                    model_version,
                    algorithm,
                    stored_at: parse_ts(&at)?,
                })
            })
            .collect()
        })
    }

    pub fn model_artifact(&self, version: &str) -> Result<Option<Vec<u8>>, StoreError> {
        self.read(|tx| {
            Ok(tx
                .query_row("SELECT artifact FROM models WHERE model_version = ?1", [version], |r| r.get(0))
                .optional()?)
        })
    }

    pub fn high_water_mark(&self, endpoint: &str) -> Result<Option<Timestamp>, StoreError> {
        self.read(|tx| {
            let raw: Option<String> = tx
                .query_row("SELECT high_water_mark FROM miner_state WHERE endpoint = ?1", [endpoint], |r| r.get(0))
                .optional()?;
            raw.map(|r| parse_ts(&r)).transpose()
        })
    }

    /// Records a mining high-water mark; it never moves backwards.
    pub fn set_high_water_mark(&self, endpoint: &str, mark: Timestamp) -> Result<(), StoreError> {
        self.write(|tx| {
            tx.execute(
                "INSERT INTO miner_state (endpoint, high_water_mark) VALUES (?1, ?2)
                 ON CONFLICT(endpoint) DO UPDATE SET high_water_mark = MAX(high_water_mark, excluded.high_water_mark)",
                params![endpoint, ts(&mark)],
            )?;
            Ok(())
        })
    }

    pub fn setting(&self, key: &str) -> Result<Option<String>, StoreError> {
        self.read(|tx| Ok(tx.query_row("SELECT value FROM settings WHERE key = ?1", [key], |r| r.get(0)).optional()?))
    }

    pub fn set_setting(&self, key: &str, value: &str) -> Result<(), StoreError> {
        self.write(|tx| {
            tx.execute(
                "INSERT INTO settings (key, value) VALUES (?1, ?2) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
                params![key, value],
            )?;
            Ok(())
        })
    }
}

fn load_changes<P: rusqlite::Params>(tx: &Transaction, sql: &str, params: P) -> Result<Vec<ReviewChange>, StoreError> {
    let mut stmt = tx.prepare_cached(sql)?;
    let payloads = stmt.query_map(params, |r| r.get::<_, String>(0))?.collect::<Result<Vec<_>, _>>()?;
    payloads.iter().map(|p| Ok(serde_json::from_str(p)?)).collect()
}

fn verdicts_in(tx: &Transaction) -> Result<HashMap<String, bool>, StoreError> {
    let mut out = HashMap::new();
    let mut stmt = tx.prepare_cached(
        "SELECT comment_id, label FROM predictions ORDER BY comment_id, predicted_at, model_version",
    )?;
    for row in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, bool>(1)?)))? {
        let (id, v) = row?;
        out.insert(id, v);
    }
    let mut latest: BTreeMap<String, (String, String, bool)> = BTreeMap::new();
    let mut stmt = tx.prepare_cached("SELECT comment_id, rater_id, labeled_at, is_useful FROM labels")?;
    for row in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, bool>(3)?)))? {
        let (id, rater, at, v) = row?;
        let key = (at, rater, v);
        match latest.get(&id) {
            Some(cur) if (&cur.0, &cur.1) >= (&key.0, &key.1) => {}
            _ => {
                latest.insert(id, key);
            }
        }
    }
    for (id, (_, _, v)) in latest {
        out.insert(id, v);
    }
    Ok(out)
}

fn submit_in(tx: &Transaction, label: &UsefulnessLabel, now: Timestamp) -> Result<bool, StoreError> {
    let author: Option<String> = tx
        .query_row(
            "SELECT ch.author_id FROM comments c JOIN changes ch ON ch.change_id = c.change_id WHERE c.comment_id = ?1",
            [&label.comment_id],
            |r| r.get(0),
        )
        .optional()?;
    match author {
        None => return Err(StoreError::UnknownComment(label.comment_id.clone())),
        Some(a) if a != label.rater_id => {
            return Err(StoreError::NotChangeAuthor {
                rater_id: label.rater_id.clone(),
                comment_id: label.comment_id.clone(),
            })
        }
        Some(_) => {}
    }
    let previous: Option<(bool, String, String)> = tx
        .query_row(
            "SELECT is_useful, category, labeled_at FROM labels WHERE comment_id = ?1 AND rater_id = ?2",
            [&label.comment_id, &label.rater_id],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
        )
        .optional()?;
    if let Some((old_useful, old_cat, old_at)) = &previous {
        tx.execute(
            "INSERT INTO label_audit (comment_id, rater_id, old_is_useful, old_category, old_labeled_at, replaced_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![label.comment_id, label.rater_id, old_useful, old_cat, old_at, ts(&now)],
        )?;
    }
    tx.execute(
        "INSERT INTO labels (comment_id, rater_id, is_useful, category, labeled_at) VALUES (?1, ?2, ?3, ?4, ?5)
         ON CONFLICT(comment_id, rater_id) DO UPDATE SET is_useful = excluded.is_useful,
            category = excluded.category, labeled_at = excluded.labeled_at",
        params![label.comment_id, label.rater_id, label.is_useful, label.category.as_str(), ts(&label.labeled_at)],
    )?;
    Ok(previous.is_some())
}
