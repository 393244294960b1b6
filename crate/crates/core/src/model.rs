//! Domain types for mined review histories, author labels and identities.
//!
//! Everything here is an immutable value object. Structural invariants are
//! checked by [`validate_change`], which reports violations as data rather
//! than failing.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

/// UTC instant with second precision.
pub type Timestamp = DateTime<Utc>;

/// Serde adapter writing timestamps as `YYYY-MM-DDTHH:MM:SSZ`.
///
/// Fractional seconds on input are truncated so that a parse/serialize cycle
/// is stable.
pub mod timestamp {
    use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::Timestamp;

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(D::Error::custom)
    }

    pub fn format(ts: &Timestamp) -> String {
        ts.to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    pub fn parse(raw: &str) -> Result<Timestamp, String> {
        DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
            .map_err(|e| format!("invalid timestamp {raw:?}: {e}"))
    }
}

/// Truncates a timestamp to whole seconds.
pub fn to_seconds(ts: Timestamp) -> Timestamp {
    ts.trunc_subsecs(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Developer {
    pub developer_id: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeStatus {
    Open,
    Merged,
    Abandoned,
}

impl ChangeStatus {
    /// Numeric encoding used by the `review_status` feature.
    pub fn code(self) -> f64 {
        match self {
            ChangeStatus::Abandoned => 0.0,
            ChangeStatus::Merged => 1.0,
            ChangeStatus::Open => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeStatus::Open => "open",
            ChangeStatus::Merged => "merged",
            ChangeStatus::Abandoned => "abandoned",
        }
    }
}

/// One code change under review with its revisions and inline discussions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewChange {
    pub change_id: String,
    pub project_id: String,
    pub author_id: String,
    #[serde(with = "timestamp")]
    pub created_at: Timestamp,
    pub status: ChangeStatus,
    pub patchsets: Vec<Patchset>,
    pub threads: Vec<CommentThread>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patchset {
    pub number: u32,
    #[serde(with = "timestamp")]
    pub uploaded_at: Timestamp,
    pub files: Vec<FileDiff>,
}

/// Post-image line numbers a patchset modified or added in one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub path: String,
    pub changed_new_lines: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentThread {
    pub thread_id: String,
    pub file_path: String,
    pub line: u32,
    pub origin_patchset: u32,
    pub comments: Vec<ReviewComment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub comment_id: String,
    pub thread_id: String,
    pub author_id: String,
    #[serde(with = "timestamp")]
    pub written_at: Timestamp,
    pub text: String,
    pub patchset_number: u32,
    /// Up to ten source lines around the commented line, captured at mining time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_context: Option<String>,
}

impl ReviewComment {
    /// Sort key honouring the `(written_at, comment_id)` ordering convention.
    pub fn order_key(&self) -> (Timestamp, &str) {
        (self.written_at, self.comment_id.as_str())
    }
}

impl ReviewChange {
    pub fn patchset(&self, number: u32) -> Option<&Patchset> {
        self.patchsets.iter().find(|p| p.number == number)
    }

    pub fn last_patchset_number(&self) -> Option<u32> {
        self.patchsets.last().map(|p| p.number)
    }

    /// Upload time of the first patchset, falling back to `created_at`.
    pub fn started_at(&self) -> Timestamp {
        self.patchsets
            .first()
            .map(|p| p.uploaded_at)
            .unwrap_or(self.created_at)
    }

    pub fn thread(&self, thread_id: &str) -> Option<&CommentThread> {
        self.threads.iter().find(|t| t.thread_id == thread_id)
    }

    /// Finds a comment and its enclosing thread.
    pub fn locate(&self, comment_id: &str) -> Option<(&CommentThread, &ReviewComment)> {
        self.threads.iter().find_map(|t| {
            t.comments
                .iter()
                .find(|c| c.comment_id == comment_id)
                .map(|c| (t, c))
        })
    }

    pub fn comments(&self) -> impl Iterator<Item = (&CommentThread, &ReviewComment)> {
        self.threads
            .iter()
            .flat_map(|t| t.comments.iter().map(move |c| (t, c)))
    }

    /// Whether any patchset diff or discussion thread refers to `path`.
    pub fn touches_file(&self, path: &str) -> bool {
        self.patchsets
            .iter()
            .any(|p| p.files.iter().any(|f| f.path == path))
            || self.threads.iter().any(|t| t.file_path == path)
    }
}

/// The eighteen comment categories raters choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommentCategory {
    AlternateOutput,
    DesignDiscussion,
    Documentation,
    FalsePositive,
    Interface,
    LargerDefect,
    Logical,
    NamingConvention,
    OrganizationOfCode,
    Praise,
    Question,
    Resource,
    SolutionApproach,
    Support,
    Timing,
    Validation,
    VisualRepresentation,
    Others,
}

impl CommentCategory {
    pub const ALL: [CommentCategory; 18] = [
        CommentCategory::AlternateOutput,
        CommentCategory::DesignDiscussion,
        CommentCategory::Documentation,
        CommentCategory::FalsePositive,
        CommentCategory::Interface,
        CommentCategory::LargerDefect,
        CommentCategory::Logical,
        CommentCategory::NamingConvention,
        CommentCategory::OrganizationOfCode,
        CommentCategory::Praise,
        CommentCategory::Question,
        CommentCategory::Resource,
        CommentCategory::SolutionApproach,
        CommentCategory::Support,
        CommentCategory::Timing,
        CommentCategory::Validation,
        CommentCategory::VisualRepresentation,
        CommentCategory::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommentCategory::AlternateOutput => "AlternateOutput",
            CommentCategory::DesignDiscussion => "DesignDiscussion",
            CommentCategory::Documentation => "Documentation",
            CommentCategory::FalsePositive => "FalsePositive",
            CommentCategory::Interface => "Interface",
            CommentCategory::LargerDefect => "LargerDefect",
            CommentCategory::Logical => "Logical",
            CommentCategory::NamingConvention => "NamingConvention",
            CommentCategory::OrganizationOfCode => "OrganizationOfCode",
            CommentCategory::Praise => "Praise",
            CommentCategory::Question => "Question",
            CommentCategory::Resource => "Resource",
            CommentCategory::SolutionApproach => "SolutionApproach",
            CommentCategory::Support => "Support",
            CommentCategory::Timing => "Timing",
            CommentCategory::Validation => "Validation",
            CommentCategory::VisualRepresentation => "VisualRepresentation",
            CommentCategory::Others => "Others",
        }
    }
}

impl fmt::Display for CommentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown comment category {0:?}")]
pub struct UnknownCategory(pub String);

impl FromStr for CommentCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommentCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// A change author's verdict on one review comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsefulnessLabel {
    pub comment_id: String,
    pub rater_id: String,
    pub is_useful: bool,
    pub category: CommentCategory,
    #[serde(with = "timestamp")]
    pub labeled_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    EmptyId,
    PatchsetNumberNotPositive,
    FirstPatchsetNotOne,
    DuplicatePatchsetNumber,
    PatchsetNumbersDecreasing,
    PatchsetUploadOutOfOrder,
    TerminalStatusWithoutPatchset,
    LineNumberNotPositive,
    DanglingPatchsetReference,
    EmptyThread,
    CommentsOutOfOrder,
    ThreadMismatch,
    CommentBeforePatchset,
    DuplicateId,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Rule::EmptyId => "empty identifier",
            Rule::PatchsetNumberNotPositive => "patchset number must be positive",
            Rule::FirstPatchsetNotOne => "first patchset must be number 1",
            Rule::DuplicatePatchsetNumber => "duplicate patchset number",
            Rule::PatchsetNumbersDecreasing => "patchset numbers not increasing",
            Rule::PatchsetUploadOutOfOrder => "patchset upload time decreases",
            Rule::TerminalStatusWithoutPatchset => "merged/abandoned change without patchsets",
            Rule::LineNumberNotPositive => "line number must be positive",
            Rule::DanglingPatchsetReference => "dangling patchset reference",
            Rule::EmptyThread => "thread has no comments",
            Rule::CommentsOutOfOrder => "thread comments not in time order",
            Rule::ThreadMismatch => "comment thread id does not match its thread",
            Rule::CommentBeforePatchset => "comment written before its patchset was uploaded",
            Rule::DuplicateId => "duplicate identifier",
        };
        f.write_str(text)
    }
}

/// A broken structural rule, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: Rule,
}

impl Violation {
    fn new(field: impl Into<String>, rule: Rule) -> Self {
        Violation {
            field: field.into(),
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every structural invariant of a change. An empty result means the
/// change is well formed.
pub fn validate_change(change: &ReviewChange) -> Vec<Violation> {
    let mut out = Vec::new();

    for (field, value) in [
        ("change_id", &change.change_id),
        ("project_id", &change.project_id),
        ("author_id", &change.author_id),
    ] {
        if value.is_empty() {
            out.push(Violation::new(field, Rule::EmptyId));
        }
    }

    if change.patchsets.is_empty() && change.status != ChangeStatus::Open {
        out.push(Violation::new("status", Rule::TerminalStatusWithoutPatchset));
    }

    let mut prev: Option<&Patchset> = None;
    for (i, ps) in change.patchsets.iter().enumerate() {
        let field = format!("patchsets[{i}]");
        if ps.number == 0 {
            out.push(Violation::new(format!("{field}.number"), Rule::PatchsetNumberNotPositive));
        } else if i == 0 && ps.number != 1 {
            out.push(Violation::new(format!("{field}.number"), Rule::FirstPatchsetNotOne));
        }
        if let Some(p) = prev {
            if ps.number == p.number {
                out.push(Violation::new(format!("{field}.number"), Rule::DuplicatePatchsetNumber));
            } else if ps.number < p.number {
                out.push(Violation::new(format!("{field}.number"), Rule::PatchsetNumbersDecreasing));
            }
            if ps.uploaded_at < p.uploaded_at {
                out.push(Violation::new(format!("{field}.uploaded_at"), Rule::PatchsetUploadOutOfOrder));
            }
        }
        for (j, f) in ps.files.iter().enumerate() {
            if f.changed_new_lines.contains(&0) {
                out.push(Violation::new(
                    format!("{field}.files[{j}].changed_new_lines"),
                    Rule::LineNumberNotPositive,
                ));
            }
        }
        prev = Some(ps);
    }

    let mut thread_ids = HashSet::new();
    let mut comment_ids = HashSet::new();
    for (i, thread) in change.threads.iter().enumerate() {
        let field = format!("threads[{i}]");
        if thread.thread_id.is_empty() {
            out.push(Violation::new(format!("{field}.thread_id"), Rule::EmptyId));
        } else if !thread_ids.insert(thread.thread_id.as_str()) {
            out.push(Violation::new(format!("{field}.thread_id"), Rule::DuplicateId));
        }
        if thread.line == 0 {
            out.push(Violation::new(format!("{field}.line"), Rule::LineNumberNotPositive));
        }
        if change.patchset(thread.origin_patchset).is_none() {
            out.push(Violation::new(
                format!("{field}.origin_patchset"),
                Rule::DanglingPatchsetReference,
            ));
        }
        if thread.comments.is_empty() {
            out.push(Violation::new(format!("{field}.comments"), Rule::EmptyThread));
        }
        for (j, pair) in thread.comments.windows(2).enumerate() {
            if pair[1].order_key() < pair[0].order_key() {
                out.push(Violation::new(
                    format!("{field}.comments[{}]", j + 1),
                    Rule::CommentsOutOfOrder,
                ));
            }
        }
        for (j, c) in thread.comments.iter().enumerate() {
            let cfield = format!("{field}.comments[{j}]");
            if c.comment_id.is_empty() || c.author_id.is_empty() {
                out.push(Violation::new(cfield.clone(), Rule::EmptyId));
            } else if !comment_ids.insert(c.comment_id.as_str()) {
                out.push(Violation::new(format!("{cfield}.comment_id"), Rule::DuplicateId));
            }
            if c.thread_id != thread.thread_id {
                out.push(Violation::new(format!("{cfield}.thread_id"), Rule::ThreadMismatch));
            }
            match change.patchset(c.patchset_number) {
                None => out.push(Violation::new(
                    format!("{cfield}.patchset_number"),
                    Rule::DanglingPatchsetReference,
                )),
                Some(ps) if c.written_at < ps.uploaded_at => out.push(Violation::new(
                    format!("{cfield}.written_at"),
                    Rule::CommentBeforePatchset,
                )),
                Some(_) => {}
            }
        }
    }

    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn well_formed_fixture_has_no_violations() {
        assert_eq!(validate_change(&change()), vec![]);
    }

    #[test]
    fn duplicate_patchset_numbers() {
        let mut c = change();
        c.patchsets[1].number = 1;
        c.patchsets[2].number = 2;
        let v = validate_change(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::DuplicatePatchsetNumber);
        assert_eq!(v[0].field, "patchsets[1].number");
    }

    #[test]
    fn dangling_comment_patchset() {
        let mut c = change();
        c.threads[0].comments[1].patchset_number = 7;
        let v = validate_change(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::DanglingPatchsetReference);
        assert_eq!(v[0].field, "threads[0].comments[1].patchset_number");
    }

    #[test]
    fn gaps_in_patchset_numbers_are_allowed() {
        let mut c = change();
        c.patchsets[2].number = 5;
        assert!(validate_change(&c).is_empty());
    }

    #[test]
    fn terminal_status_requires_patchset() {
        let mut c = change();
        c.patchsets.clear();
        c.threads.clear();
        assert_eq!(validate_change(&c)[0].rule, Rule::TerminalStatusWithoutPatchset);
        c.status = ChangeStatus::Open;
        assert!(validate_change(&c).is_empty());
    }

    #[test]
    fn out_of_order_and_early_comments() {
        let mut c = change();
        c.threads[0].comments.swap(0, 1);
        let rules: Vec<_> = validate_change(&c).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::CommentsOutOfOrder]);

        let mut c = change();
        c.threads[0].comments[0].written_at = ts(1, 8);
        let rules: Vec<_> = validate_change(&c).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::CommentBeforePatchset]);
    }

    #[test]
    fn same_second_comments_order_by_id() {
        let mut c = change();
        c.threads[0].comments[1].written_at = c.threads[0].comments[0].written_at;
        assert!(validate_change(&c).is_empty());
        c.threads[0].comments.swap(0, 1);
        assert_eq!(validate_change(&c)[0].rule, Rule::CommentsOutOfOrder);
    }

    #[test]
    fn validation_is_pure() {
        let mut c = change();
        c.patchsets[0].number = 0;
        c.threads[0].line = 0;
        assert_eq!(validate_change(&c), validate_change(&c));
    }

    #[test]
    fn category_names_round_trip() {
        for cat in CommentCategory::ALL {
            assert_eq!(cat.as_str().parse::<CommentCategory>().unwrap(), cat);
            let json = serde_json::to_string(&cat).unwrap();
            assert_eq!(json, format!("\"{}\"", cat.as_str()));
        }
        assert!("Bogus".parse::<CommentCategory>().is_err());
    }

    #[test]
    fn timestamps_truncate_to_seconds() {
        let t = timestamp::parse("2024-03-01T10:00:00.750+02:00").unwrap();
        assert_eq!(timestamp::format(&t), "2024-03-01T08:00:00Z");
    }
}
