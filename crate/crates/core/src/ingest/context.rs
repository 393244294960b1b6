//! Per-comment facts derived from a review history: whether a later patchset
//! touched code near the comment, the shape of its discussion thread, and the
//! people's prior experience.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{ChangeStatus, ReviewChange, ReviewComment, Timestamp};

use super::ReviewDump;

/// A later change within this many lines of a comment counts as triggered.
pub const TRIGGER_WINDOW: u32 = 5;
/// `line_change` value when no later patchset touched the commented file.
pub const NO_CHANGE_DISTANCE: u32 = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerResult {
    pub triggered: bool,
    pub line_change: u32,
}

impl TriggerResult {
    fn from_distance(distance: Option<u32>) -> Self {
        let line_change = distance.map_or(NO_CHANGE_DISTANCE, |d| d.min(NO_CHANGE_DISTANCE));
        TriggerResult {
            triggered: line_change <= TRIGGER_WINDOW,
            line_change,
        }
    }
}

/// Looks for the closest changed line in any patchset newer than the one the
/// comment was written on, in the file its thread is anchored to. Changes by
/// anyone count.
pub fn change_trigger(comment: &ReviewComment, change: &ReviewChange) -> TriggerResult {
    let Some(thread) = change.thread(&comment.thread_id) else {
        return TriggerResult::from_distance(None);
    };
    let distance = change
        .patchsets
        .iter()
        .filter(|ps| ps.number > comment.patchset_number)
        .flat_map(|ps| ps.files.iter())
        .filter(|f| f.path == thread.file_path)
        .flat_map(|f| f.changed_new_lines.iter())
        .map(|&line| line.abs_diff(thread.line))
        .min();
    TriggerResult::from_distance(distance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadContext {
    pub author_responded: bool,
    /// Change-author replies after the comment, in time order.
    pub reply_texts: Vec<String>,
    pub thread_length: u32,
    pub num_participant: u32,
    pub is_last_patch: bool,
    /// 1-based position of the comment's patchset among the change's patchsets.
    pub patch_id: u32,
    pub num_patches: u32,
    /// Seconds between the patchset upload and the comment.
    pub review_interval: u64,
    pub review_status: ChangeStatus,
}

pub fn thread_context(comment: &ReviewComment, change: &ReviewChange) -> ThreadContext {
    let thread_comments: &[ReviewComment] = change
        .thread(&comment.thread_id)
        .map(|t| t.comments.as_slice())
        .unwrap_or(std::slice::from_ref(comment));

    let mut replies: Vec<&ReviewComment> = thread_comments
        .iter()
        .filter(|c| c.author_id == change.author_id && c.order_key() > comment.order_key())
        .collect();
    replies.sort_by(|a, b| a.order_key().cmp(&b.order_key()));

    let participants: HashSet<&str> = thread_comments.iter().map(|c| c.author_id.as_str()).collect();

    let position = change
        .patchsets
        .iter()
        .position(|p| p.number == comment.patchset_number);
    let review_interval = change
        .patchset(comment.patchset_number)
        .map(|ps| (comment.written_at - ps.uploaded_at).num_seconds().max(0) as u64)
        .unwrap_or(0);

    ThreadContext {
        author_responded: !replies.is_empty(),
        reply_texts: replies.iter().map(|c| c.text.clone()).collect(),
        thread_length: thread_comments.len() as u32,
        num_participant: participants.len() as u32,
        is_last_patch: change.last_patchset_number() == Some(comment.patchset_number),
        patch_id: position.map_or(0, |p| p as u32 + 1),
        num_patches: change.patchsets.len() as u32,
        review_interval,
        review_status: change.status,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceFeatures {
    pub code_reviewership: u32,
    pub code_ownership: u32,
    pub reviewing_experience: u32,
    pub developer_experience: u32,
}

impl std::ops::Add for ExperienceFeatures {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ExperienceFeatures {
            code_reviewership: self.code_reviewership + o.code_reviewership,
            code_ownership: self.code_ownership + o.code_ownership,
            reviewing_experience: self.reviewing_experience + o.reviewing_experience,
            developer_experience: self.developer_experience + o.developer_experience,
        }
    }
}

/// Experience counts over `history`, considering only activity strictly
/// before `as_of`. Files are matched by path within the same project.
pub fn experience(
    history: &ReviewDump,
    reviewer_id: &str,
    author_id: &str,
    file_path: &str,
    project_id: &str,
    as_of: Timestamp,
) -> ExperienceFeatures {
    HistoryIndex::new(history).experience(reviewer_id, author_id, file_path, project_id, as_of)
}

struct ChangeSummary {
    author_id: String,
    started_at: Timestamp,
    files: HashSet<String>,
    /// Earliest comment time per commenter.
    first_comment: HashMap<String, Timestamp>,
}

/// Precomputed per-project change summaries for repeated experience queries.
pub struct HistoryIndex {
    by_project: HashMap<String, Vec<ChangeSummary>>,
}

impl HistoryIndex {
    pub fn new(history: &ReviewDump) -> Self {
        let mut by_project: HashMap<String, Vec<ChangeSummary>> = HashMap::new();
        for change in &history.changes {
            let mut files: HashSet<String> = change
                .patchsets
                .iter()
                .flat_map(|p| p.files.iter().map(|f| f.path.clone()))
                .collect();
            files.extend(change.threads.iter().map(|t| t.file_path.clone()));
            let mut first_comment: HashMap<String, Timestamp> = HashMap::new();
            for (_, c) in change.comments() {
                first_comment
                    .entry(c.author_id.clone())
                    .and_modify(|t| *t = (*t).min(c.written_at))
                    .or_insert(c.written_at);
            }
            by_project
                .entry(change.project_id.clone())
                .or_default()
                .push(ChangeSummary {
                    author_id: change.author_id.clone(),
                    started_at: change.started_at(),
                    files,
                    first_comment,
                });
        }
        HistoryIndex { by_project }
    }

    pub fn experience(
        &self,
        reviewer_id: &str,
        author_id: &str,
        file_path: &str,
        project_id: &str,
        as_of: Timestamp,
    ) -> ExperienceFeatures {
        let mut out = ExperienceFeatures::default();
        let Some(changes) = self.by_project.get(project_id) else {
            return out;
        };
        for c in changes {
            let reviewed = c
                .first_comment
                .get(reviewer_id)
                .is_some_and(|t| *t < as_of);
            let touches = c.files.contains(file_path);
            if reviewed {
                out.reviewing_experience += 1;
                if touches {
                    out.code_reviewership += 1;
                }
            }
            if c.started_at < as_of {
                if touches && c.author_id == reviewer_id {
                    out.code_ownership += 1;
                }
                if c.author_id == author_id {
                    out.developer_experience += 1;
                }
            }
        }
        out
    }
}
