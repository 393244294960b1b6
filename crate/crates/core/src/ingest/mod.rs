//! Review-history acquisition.
//!
//! Histories arrive either as a canonical JSON dump ([`parse_review_dump`]) or
//! from a Gerrit-style REST endpoint ([`gerrit`]). The [`context`] submodule
//! derives per-comment review facts from a history.

pub mod context;
pub mod gerrit;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{validate_change, Developer, Project, ReviewChange, Violation};

pub use context::{
    change_trigger, experience, thread_context, ExperienceFeatures, HistoryIndex, ThreadContext,
    TriggerResult, NO_CHANGE_DISTANCE, TRIGGER_WINDOW,
};

pub const FORMAT_VERSION: u32 = 1;

/// Portable snapshot of projects, developers and their review changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDump {
    pub format_version: u32,
    pub developers: Vec<Developer>,
    pub projects: Vec<Project>,
    pub changes: Vec<ReviewChange>,
}

impl Default for ReviewDump {
    fn default() -> Self {
        ReviewDump {
            format_version: FORMAT_VERSION,
            developers: Vec::new(),
            projects: Vec::new(),
            changes: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("malformed dump JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("unsupported dump format_version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u64),
    #[error("dangling {kind} reference {id:?}")]
    DanglingReference { kind: &'static str, id: String },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("change {change_id:?} is malformed: {}", join(.violations))]
    InvalidChange {
        change_id: String,
        violations: Vec<Violation>,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Parses and fully validates a canonical dump.
pub fn parse_review_dump(bytes: &[u8]) -> Result<ReviewDump, DumpError> {
    // Gate on the version before committing to the v1 shape.
    let raw: serde_json::Value = serde_json::from_slice(bytes)?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(DumpError::UnsupportedVersion(v)),
        None => {
            return Err(DumpError::MalformedJson(serde::de::Error::custom(
                "missing integer field `format_version`",
            )))
        }
    }
    let dump: ReviewDump = serde_json::from_value(raw)?;
    dump.validate()?;
    Ok(dump)
}

/// Canonical pretty-printed serialization.
pub fn serialize_review_dump(dump: &ReviewDump) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(dump).expect("dump serialization is infallible");
    out.push(b'\n');
    out
}

impl ReviewDump {
    /// Checks version, id uniqueness, cross references and every change.
    pub fn validate(&self) -> Result<(), DumpError> {
        if self.format_version != FORMAT_VERSION {
            return Err(DumpError::UnsupportedVersion(self.format_version.into()));
        }
        let developers = unique_ids("developer", self.developers.iter().map(|d| &d.developer_id))?;
        let projects = unique_ids("project", self.projects.iter().map(|p| &p.project_id))?;
        unique_ids("change", self.changes.iter().map(|c| &c.change_id))?;
        unique_ids(
            "comment",
            self.changes
                .iter()
                .flat_map(|c| c.comments().map(|(_, k)| &k.comment_id)),
        )?;

        let dangling = |kind: &'static str, id: &str| DumpError::DanglingReference {
            kind,
            id: id.to_string(),
        };
        for change in &self.changes {
            if !projects.contains(change.project_id.as_str()) {
                return Err(dangling("project", &change.project_id));
            }
            if !developers.contains(change.author_id.as_str()) {
                return Err(dangling("developer", &change.author_id));
            }
            for (_, comment) in change.comments() {
                if !developers.contains(comment.author_id.as_str()) {
                    return Err(dangling("developer", &comment.author_id));
                }
            }
            let violations = validate_change(change);
            if !violations.is_empty() {
                return Err(DumpError::InvalidChange {
                    change_id: change.change_id.clone(),
                    violations,
                });
            }
        }
        Ok(())
    }

    pub fn change(&self, change_id: &str) -> Option<&ReviewChange> {
        self.changes.iter().find(|c| c.change_id == change_id)
    }

    /// Merges `other` into `self`, replacing entities with equal ids.
    pub fn merge(&mut self, other: ReviewDump) {
        fn upsert<T, F: Fn(&T) -> &str>(dst: &mut Vec<T>, src: Vec<T>, id: F) {
            for item in src {
                match dst.iter().position(|d| id(d) == id(&item)) {
                    Some(i) => dst[i] = item,
                    None => dst.push(item),
                }
            }
        }
        upsert(&mut self.developers, other.developers, |d| &d.developer_id);
        upsert(&mut self.projects, other.projects, |p| &p.project_id);
        upsert(&mut self.changes, other.changes, |c| &c.change_id);
    }
}

fn unique_ids<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<HashSet<&'a str>, DumpError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(DumpError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(seen)
}
