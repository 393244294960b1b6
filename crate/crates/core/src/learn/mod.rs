//! Classifiers, oversampling, cross-validation and paired model comparison.
//!
//! Labels are `bool`, with `true` meaning useful (the positive class).

mod artifact;
mod cv;
mod forest;
mod logistic;
mod matrix;
mod smote;
pub mod stats;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use artifact::{ArtifactError, TrainedModel, ARTIFACT_VERSION};
pub use cv::{
    cross_validate, fold_assignments, fold_data, ClassScores, Confusion, EvalConfig, EvaluationReport, FoldData,
    FoldScore, MeanScores,
};
pub use forest::{ForestParams, RandomForest};
pub use logistic::{LogisticParams, LogisticRegression};
pub use matrix::Matrix;
pub use smote::{smote, Oversampled, DEFAULT_K as SMOTE_K};
pub use stats::{compare, StatTestResult};
pub use tree::{DecisionTree, MaxFeatures, Node, TreeParams};

/// Decision threshold on the useful-class probability.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("feature matrix contains a non-finite value")]
    NonFiniteFeature,
    #[error("minority class has a single sample; cannot interpolate")]
    SingleMinoritySample,
    #[error("too few samples: need at least {needed} per class, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("feature schema mismatch: model expects {expected} values, got {got}")]
    SchemaMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DecisionTree,
    RandomForest,
    LogisticRegression,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::DecisionTree, Algorithm::RandomForest, Algorithm::LogisticRegression];

    pub fn short_name(self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "dt",
            Algorithm::RandomForest => "rf",
            Algorithm::LogisticRegression => "lr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dt" | "decision_tree" => Ok(Algorithm::DecisionTree),
            "rf" | "random_forest" => Ok(Algorithm::RandomForest),
            "lr" | "logistic_regression" => Ok(Algorithm::LogisticRegression),
            other => Err(format!("unknown algorithm {other:?} (expected dt, rf or lr)")),
        }
    }
}

/// An algorithm together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "params", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    LogisticRegression(LogisticParams),
}

impl AlgorithmConfig {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::DecisionTree => AlgorithmConfig::DecisionTree(TreeParams::default()),
            Algorithm::RandomForest => AlgorithmConfig::RandomForest(ForestParams::default()),
            Algorithm::LogisticRegression => AlgorithmConfig::LogisticRegression(LogisticParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::DecisionTree(_) => Algorithm::DecisionTree,
            AlgorithmConfig::RandomForest(_) => Algorithm::RandomForest,
            AlgorithmConfig::LogisticRegression(_) => Algorithm::LogisticRegression,
        }
    }
}

/// A fitted model of any supported algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "fitted", rename_all = "snake_case")]
pub enum Classifier {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    LogisticRegression(LogisticRegression),
}

impl Classifier {
    pub fn n_features(&self) -> usize {
        match self {
            Classifier::DecisionTree(t) => t.n_features,
            Classifier::RandomForest(f) => f.trees.first().map_or(0, |t| t.n_features),
            Classifier::LogisticRegression(m) => m.weights.len(),
        }
    }

    /// Probability of the useful class.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, LearnError> {
        if row.len() != self.n_features() {
            return Err(LearnError::SchemaMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(match self {
            Classifier::DecisionTree(t) => t.predict_proba(row),
            Classifier::RandomForest(f) => f.predict_proba(row),
            Classifier::LogisticRegression(m) => m.predict_proba(row),
        })
    }

    pub fn predict(&self, row: &[f64]) -> Result<bool, LearnError> {
        Ok(self.predict_proba(row)? >= THRESHOLD)
    }

    /// Per-feature importance, summing to 1 unless the model ignores every feature.
    pub fn importances(&self) -> Vec<f64> {
        match self {
            Classifier::DecisionTree(t) => t.importances.clone(),
            Classifier::RandomForest(f) => f.importances(),
            Classifier::LogisticRegression(m) => m.importances(),
        }
    }
}

/// Fits `config` on `(x, y)`. Deterministic in `seed`.
pub fn train(config: &AlgorithmConfig, x: &Matrix, y: &[bool], seed: u64) -> Result<Classifier, LearnError> {
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch(x.rows(), y.len()));
    }
    if !x.is_finite() {
        return Err(LearnError::NonFiniteFeature);
    }
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == y.len() {
        return Err(LearnError::SingleClassTraining);
    }
    Ok(match config {
        AlgorithmConfig::DecisionTree(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Classifier::DecisionTree(DecisionTree::fit(x, y, p, &mut rng))
        }
        AlgorithmConfig::RandomForest(p) => Classifier::RandomForest(RandomForest::fit(x, y, p, seed)),
        AlgorithmConfig::LogisticRegression(p) => Classifier::LogisticRegression(LogisticRegression::fit(x, y, p)),
    })
}
