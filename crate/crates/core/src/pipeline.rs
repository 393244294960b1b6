//! End-to-end training, evaluation and prediction over a review history and
//! its usefulness labels.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::features::{
    content_words, design_matrix, design_row, extract, fit_discretizer, Discretizer, FeatureError,
    FeatureSelection, FeatureVector, RfeConfig, DEFAULT_BINS,
};
use crate::ingest::{HistoryIndex, ReviewDump};
use crate::learn::{
    compare, cross_validate, smote, train, Algorithm, AlgorithmConfig, EvalConfig, EvaluationReport, LearnError,
    StatTestResult, TrainedModel, ARTIFACT_VERSION, SMOTE_K, THRESHOLD,
};
use crate::model::{ReviewChange, ReviewComment, UsefulnessLabel};
use crate::textfeat::{Lexicons, Vectorizer, DEFAULT_MAX_TERMS};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("no labeled comment found in the review history")]
    NoLabeledComments,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub algorithm: AlgorithmConfig,
    pub seed: u64,
    pub bins: usize,
    pub correlation_threshold: f64,
    pub max_terms: usize,
    /// Folds for recursive feature elimination; `None` keeps every feature
    /// that survives correlation pruning.
    pub rfe_folds: Option<usize>,
    pub smote: bool,
}

impl TrainOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        TrainOptions {
            algorithm: AlgorithmConfig::default_for(algorithm),
            seed: DEFAULT_SEED,
            bins: DEFAULT_BINS,
            correlation_threshold: 0.9,
            max_terms: DEFAULT_MAX_TERMS,
            rfe_folds: Some(10),
            smote: true,
        }
    }
}

/// One verdict per comment: the most recent label wins, ties broken by rater id.
pub fn resolve_labels(labels: &[UsefulnessLabel]) -> BTreeMap<String, bool> {
    let mut latest: BTreeMap<&str, &UsefulnessLabel> = BTreeMap::new();
    for l in labels {
        latest
            .entry(&l.comment_id)
            .and_modify(|cur| {
                if (l.labeled_at, &l.rater_id) > (cur.labeled_at, &cur.rater_id) {
                    *cur = l;
                }
            })
            .or_insert(l);
    }
    latest.into_iter().map(|(k, v)| (k.to_string(), v.is_useful)).collect()
}

/// Comment id → (change, comment) over a history.
pub fn comment_lookup(dump: &ReviewDump) -> HashMap<&str, (&ReviewChange, &ReviewComment)> {
    dump.changes
        .iter()
        .flat_map(|ch| ch.comments().map(move |(_, c)| (c.comment_id.as_str(), (ch, c))))
        .collect()
}

/// Raw (undiscretized) feature vectors of the labeled comments.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub comment_ids: Vec<String>,
    pub labels: Vec<bool>,
    pub raw: Vec<FeatureVector>,
    pub vectorizer: Vectorizer,
    pub missing_code_context: usize,
    /// Labels naming comments absent from the history.
    pub skipped_labels: Vec<String>,
}

pub fn labeled_set(
    dump: &ReviewDump,
    labels: &[UsefulnessLabel],
    lexicons: &Lexicons,
    max_terms: usize,
) -> Result<LabeledSet, PipelineError> {
    let lookup = comment_lookup(dump);
    let mut found = Vec::new();
    let mut skipped_labels = Vec::new();
    for (id, useful) in resolve_labels(labels) {
        match lookup.get(id.as_str()) {
            Some(&(change, comment)) => found.push((id, useful, change, comment)),
            None => skipped_labels.push(id),
        }
    }
    if found.is_empty() {
        return Err(PipelineError::NoLabeledComments);
    }
    let docs: Vec<Vec<String>> = found.iter().map(|f| content_words(&f.3.text, lexicons)).collect();
    let vectorizer = Vectorizer::fit(&docs, max_terms).map_err(|_| PipelineError::NoLabeledComments)?;
    let history = HistoryIndex::new(dump);
    let mut raw = Vec::with_capacity(found.len());
    let mut missing = 0;
    for (_, _, change, comment) in &found {
        let e = extract(comment, change, &history, &vectorizer, lexicons)?;
        missing += usize::from(e.missing_code_context);
        raw.push(e.vector);
    }
    Ok(LabeledSet {
        comment_ids: found.iter().map(|f| f.0.clone()).collect(),
        labels: found.iter().map(|f| f.1).collect(),
        raw,
        vectorizer,
        missing_code_context: missing,
        skipped_labels,
    })
}

/// Discretized vectors and the selected feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub discretizer: Discretizer,
    pub vectors: Vec<FeatureVector>,
    pub selection: FeatureSelection,
}

pub fn prepare(set: &LabeledSet, options: &TrainOptions) -> Result<Prepared, PipelineError> {
    let discretizer = fit_discretizer(&set.raw, options.bins)?;
    let vectors: Vec<FeatureVector> = set.raw.iter().map(|v| discretizer.apply(v)).collect();
    let rfe = options.rfe_folds.map(|folds| RfeConfig {
        algorithm: options.algorithm,
        folds,
        seed: options.seed,
        smote: options.smote,
    });
    let selection = FeatureSelection::fit(
        &vectors,
        &set.labels,
        set.vectorizer.dim(),
        options.correlation_threshold,
        rfe.as_ref(),
    )?;
    Ok(Prepared {
        discretizer,
        vectors,
        selection,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub model: TrainedModel,
    pub selection: FeatureSelection,
    pub samples: usize,
    pub useful: usize,
    pub missing_code_context: usize,
    pub skipped_labels: Vec<String>,
}

/// Extracts, discretizes and selects features, then fits the final model on
/// every labeled comment (oversampled when enabled).
pub fn fit_model(
    dump: &ReviewDump,
    labels: &[UsefulnessLabel],
    options: &TrainOptions,
    lexicons: &Lexicons,
) -> Result<TrainingOutcome, PipelineError> {
    let set = labeled_set(dump, labels, lexicons, options.max_terms)?;
    let prepared = prepare(&set, options)?;
    let selected = prepared.selection.final_selected.clone();
    let design = design_matrix(&prepared.vectors, &selected, set.vectorizer.dim())?;
    let classifier = if options.smote {
        let o = smote(&design.x, &set.labels, SMOTE_K, options.seed)?;
        train(&options.algorithm, &o.x, &o.y, options.seed)?
    } else {
        train(&options.algorithm, &design.x, &set.labels, options.seed)?
    };
    let model = TrainedModel {
        artifact_version: ARTIFACT_VERSION,
        algorithm: options.algorithm.algorithm(),
        hyperparams: options.algorithm,
        seed: options.seed,
        vectorizer: set.vectorizer.clone(),
        discretizer: prepared.discretizer,
        selected_features: selected,
        classifier,
        lexicon_versions: lexicons
            .versions()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        training_samples: set.labels.len(),
    };
    Ok(TrainingOutcome {
        model,
        selection: prepared.selection,
        samples: set.labels.len(),
        useful: set.labels.iter().filter(|&&b| b).count(),
        missing_code_context: set.missing_code_context,
        skipped_labels: set.skipped_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub useful: bool,
    pub probability: f64,
}

/// Classifies a raw feature vector produced by [`extract`] with the model's
/// own vectorizer.
pub fn predict(model: &TrainedModel, raw: &FeatureVector) -> Result<Prediction, PipelineError> {
    let v = model.discretizer.apply(raw);
    let row = design_row(&v, &model.selected_features, model.vectorizer.dim())?;
    let probability = model.classifier.predict_proba(&row)?;
    Ok(Prediction {
        useful: probability >= THRESHOLD,
        probability,
    })
}

pub fn predict_comment(
    model: &TrainedModel,
    comment: &ReviewComment,
    change: &ReviewChange,
    history: &HistoryIndex,
    lexicons: &Lexicons,
) -> Result<Prediction, PipelineError> {
    let e = extract(comment, change, history, &model.vectorizer, lexicons)?;
    predict(model, &e.vector)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Algorithm,
    pub b: Algorithm,
    pub metric: String,
    pub result: StatTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub selection: FeatureSelection,
    pub reports: Vec<EvaluationReport>,
    pub comparisons: Vec<Comparison>,
}

/// Cross-validates each algorithm on the same folds. Features are selected
/// once, on all labeled comments, with `options.algorithm` as the estimator;
/// every pair of algorithms is then compared fold by fold.
pub fn evaluate(
    dump: &ReviewDump,
    labels: &[UsefulnessLabel],
    options: &TrainOptions,
    algorithms: &[AlgorithmConfig],
    repeats: usize,
    folds: usize,
    lexicons: &Lexicons,
) -> Result<EvaluationOutcome, PipelineError> {
    let set = labeled_set(dump, labels, lexicons, options.max_terms)?;
    let prepared = prepare(&set, options)?;
    let design = design_matrix(&prepared.vectors, &prepared.selection.final_selected, set.vectorizer.dim())?;
    let mut reports = Vec::new();
    for alg in algorithms {
        let config = EvalConfig {
            algorithm: *alg,
            seed: options.seed,
            repeats,
            folds,
            smote: options.smote,
        };
        reports.push(cross_validate(&design.x, &set.labels, &config)?);
    }
    let mut comparisons = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let metrics: [(&str, fn(&crate::learn::FoldScore) -> f64); 3] = [
                ("accuracy", |r| r.accuracy),
                ("useful_f1", |r| r.useful.f1),
                ("not_useful_f1", |r| r.not_useful.f1),
            ];
            for (name, f) in metrics {
                comparisons.push(Comparison {
                    a: reports[i].config.algorithm.algorithm(),
                    b: reports[j].config.algorithm.algorithm(),
                    metric: name.to_string(),
                    result: compare(&reports[i].column(f), &reports[j].column(f))?,
                });
            }
        }
    }
    Ok(EvaluationOutcome {
        selection: prepared.selection,
        reports,
        comparisons,
    })
}
