//! Per-comment feature vectors, discretization and feature selection.

mod discretize;
mod select;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::{change_trigger, thread_context, HistoryIndex};
use crate::learn::{LearnError, Matrix};
use crate::model::{ReviewChange, ReviewComment};
use crate::textfeat::{self, cosine_similarity, Lexicons, SparseVector, Vectorizer};

pub use discretize::{fit_discretizer, Discretizer, DEFAULT_BINS, DISCRETIZED};
pub use select::{drop_correlated, pearson, rfe_cv, AuditEntry, CorrelationStage, FeatureSelection, RfeConfig, RfeStep};

/// Identifier of the message TF-IDF block.
pub const TFIDF: &str = "message_tfidf";

pub const SCALAR_NAMES: [&str; 25] = [
    "comment_sentiment",
    "question_ratio",
    "code_element_number",
    "code_element_ratio",
    "similarity",
    "readability",
    "word_count",
    "stop_word_ratio",
    "author_responded",
    "review_interval",
    "patch_id",
    "num_patches",
    "change_trigger",
    "line_change",
    "confirmatory_response",
    "gratitude",
    "reply_sentiment",
    "is_last_patch",
    "thread_length",
    "num_participant",
    "review_status",
    "code_reviewership",
    "code_ownership",
    "reviewing_experience",
    "developer_experience",
];

pub const NUM_SCALARS: usize = SCALAR_NAMES.len();

pub fn scalar_index(name: &str) -> Option<usize> {
    SCALAR_NAMES.iter().position(|n| *n == name)
}

/// All feature ids in canonical order: the TF-IDF block, then the scalars.
pub fn all_features() -> Vec<String> {
    std::iter::once(TFIDF)
        .chain(SCALAR_NAMES)
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("comment {0} does not belong to change {1}")]
    CommentNotInChange(String, String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub tfidf: SparseVector,
    pub scalars: [f64; NUM_SCALARS],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        scalar_index(name).map(|i| self.scalars[i])
    }

    pub fn set(&mut self, name: &str, value: f64) {
        let i = scalar_index(name).unwrap_or_else(|| panic!("unknown scalar feature {name}"));
        self.scalars[i] = value;
    }
}

/// A feature vector plus quality flags raised while computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub vector: FeatureVector,
    /// The comment had no code snippet, so `similarity` is 0.
    pub missing_code_context: bool,
}

/// Lowercased tokens with stop words removed.
pub fn content_words(text: &str, lexicons: &Lexicons) -> Vec<String> {
    textfeat::words(text)
        .into_iter()
        .filter(|w| !lexicons.stopwords.contains(w))
        .collect()
}

/// TF-IDF cosine between the comment and the code it is attached to,
/// weighting terms over the two documents.
pub fn code_similarity(comment: &str, code: &str, lexicons: &Lexicons) -> f64 {
    let docs = [content_words(comment, lexicons), content_words(code, lexicons)];
    let Ok(v) = Vectorizer::fit(&docs, usize::MAX) else {
        return 0.0;
    };
    cosine_similarity(&v.transform(&docs[0]), &v.transform(&docs[1])).unwrap_or(0.0)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Computes the feature vector of `comment`, which must belong to `change`.
/// `history` supplies the experience counts; `vectorizer` the message block.
pub fn extract(
    comment: &ReviewComment,
    change: &ReviewChange,
    history: &HistoryIndex,
    vectorizer: &Vectorizer,
    lexicons: &Lexicons,
) -> Result<Extraction, FeatureError> {
    let Some((thread, _)) = change.locate(&comment.comment_id) else {
        return Err(FeatureError::CommentNotInChange(
            comment.comment_id.clone(),
            change.change_id.clone(),
        ));
    };
    let text = &comment.text;
    let ctx = thread_context(comment, change);
    let trigger = change_trigger(comment, change);
    let exp = history.experience(
        &comment.author_id,
        &change.author_id,
        &thread.file_path,
        &change.project_id,
        comment.written_at,
    );
    let replies = textfeat::reply_signals(&ctx.reply_texts, lexicons);
    let (code_n, code_ratio) = textfeat::code_element_stats(text, lexicons);
    let similarity = comment
        .code_context
        .as_deref()
        .map(|code| code_similarity(text, code, lexicons));

    let scalars = [
        textfeat::sentiment(text, lexicons) as f64,
        textfeat::question_ratio(text),
        code_n as f64,
        code_ratio,
        similarity.unwrap_or(0.0),
        textfeat::readability(text),
        textfeat::words(text).len() as f64,
        textfeat::stop_word_ratio(text, lexicons),
        flag(ctx.author_responded),
        ctx.review_interval as f64,
        ctx.patch_id as f64,
        ctx.num_patches as f64,
        flag(trigger.triggered),
        trigger.line_change as f64,
        flag(replies.confirmatory),
        flag(replies.gratitude),
        replies.reply_sentiment as f64,
        flag(ctx.is_last_patch),
        ctx.thread_length as f64,
        ctx.num_participant as f64,
        ctx.review_status.code(),
        exp.code_reviewership as f64,
        exp.code_ownership as f64,
        exp.reviewing_experience as f64,
        exp.developer_experience as f64,
    ];
    Ok(Extraction {
        vector: FeatureVector {
            tfidf: vectorizer.transform(&content_words(text, lexicons)),
            scalars,
        },
        missing_code_context: similarity.is_none(),
    })
}

/// Column layout of a design matrix over a subset of features.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Matrix,
    /// Feature id and its column range, in canonical order.
    pub groups: Vec<(String, Range<usize>)>,
}

/// Builds the design matrix for `features` (ids in any order; columns follow
/// canonical order). The TF-IDF block expands to `tfidf_dim` columns.
pub fn design_matrix(
    vectors: &[FeatureVector],
    features: &[String],
    tfidf_dim: usize,
) -> Result<Design, FeatureError> {
    let mut groups = Vec::new();
    let mut scalar_cols = Vec::new();
    let mut at = 0;
    for id in all_features() {
        if !features.contains(&id) {
            continue;
        }
        let width = if id == TFIDF { tfidf_dim } else { 1 };
        if let Some(i) = scalar_index(&id) {
            scalar_cols.push(i);
        }
        groups.push((id, at..at + width));
        at += width;
    }
    if let Some(unknown) = features.iter().find(|f| !all_features().contains(f)) {
        return Err(FeatureError::UnknownFeature(unknown.clone()));
    }
    let with_tfidf = features.iter().any(|f| f == TFIDF);
    let mut x = Matrix::with_cols(at);
    let mut row = vec![0.0; at];
    for v in vectors {
        design_row_into(v, with_tfidf, tfidf_dim, &scalar_cols, &mut row)?;
        x.push_row(&row);
    }
    Ok(Design { x, groups })
}

/// One design row; see [`design_matrix`].
pub fn design_row(v: &FeatureVector, features: &[String], tfidf_dim: usize) -> Result<Vec<f64>, FeatureError> {
    Ok(design_matrix(std::slice::from_ref(v), features, tfidf_dim)?.x.row(0).to_vec())
}

fn design_row_into(
    v: &FeatureVector,
    with_tfidf: bool,
    tfidf_dim: usize,
    scalar_cols: &[usize],
    row: &mut [f64],
) -> Result<(), FeatureError> {
    let mut at = 0;
    if with_tfidf {
        if v.tfidf.dim != tfidf_dim {
            return Err(LearnError::SchemaMismatch {
                expected: tfidf_dim,
                got: v.tfidf.dim,
            }
            .into());
        }
        row[..tfidf_dim].iter_mut().for_each(|c| *c = 0.0);
        for &(i, w) in &v.tfidf.entries {
            row[i as usize] = w;
        }
        at = tfidf_dim;
    }
    for (k, &i) in scalar_cols.iter().enumerate() {
        row[at + k] = v.scalars[i];
    }
    Ok(())
}

/// Scalar features only, as an `n × 25` matrix.
pub fn scalar_matrix(vectors: &[FeatureVector]) -> Matrix {
    let mut m = Matrix::with_cols(NUM_SCALARS);
    for v in vectors {
        m.push_row(&v.scalars);
    }
    m
}

#[cfg(test)]
mod tests;
