//! Two-stage feature selection: correlation pruning, then recursive
//! elimination scored by cross-validated minority-class F1.

use serde::{Deserialize, Serialize};

use super::{design_matrix, scalar_matrix, Design, FeatureError, FeatureVector, SCALAR_NAMES, TFIDF};
use crate::learn::{cross_validate, smote, train, AlgorithmConfig, EvalConfig, LearnError, Matrix, SMOTE_K};

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AuditEntry {
    DroppedDegenerate {
        feature: String,
    },
    DroppedCorrelated {
        feature: String,
        correlated_with: String,
        pair_r: f64,
        feature_target_r: f64,
        kept_target_r: f64,
    },
    Eliminated {
        step: usize,
        feature: String,
        importance: f64,
        mean_f1: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStage {
    /// Indices of kept columns, ascending.
    pub kept: Vec<usize>,
    pub audit: Vec<AuditEntry>,
}

/// Drops zero-variance columns, then visits the rest by decreasing
/// |point-biserial correlation| with `y`, dropping any column whose
/// |Pearson r| with an already kept column reaches `threshold`.
pub fn drop_correlated(
    x: &Matrix,
    names: &[&str],
    y: &[bool],
    threshold: f64,
) -> Result<CorrelationStage, FeatureError> {
    if x.rows() < 2 {
        return Err(LearnError::TooFewSamples { needed: 2, got: x.rows() }.into());
    }
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch(x.rows(), y.len()).into());
    }
    let target: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
    let target_r: Vec<f64> = cols.iter().map(|c| pearson(c, &target)).collect();

    let mut audit = Vec::new();
    let mut order = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|v| *v == c[0]) {
            audit.push(AuditEntry::DroppedDegenerate {
                feature: names[j].to_string(),
            });
        } else {
            order.push(j);
        }
    }
    order.sort_by(|&a, &b| target_r[b].abs().total_cmp(&target_r[a].abs()).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::new();
    for j in order {
        let clash = kept
            .iter()
            .map(|&k| (k, pearson(&cols[j], &cols[k])))
            .find(|(_, r)| r.abs() >= threshold);
        match clash {
            Some((k, r)) => audit.push(AuditEntry::DroppedCorrelated {
                feature: names[j].to_string(),
                correlated_with: names[k].to_string(),
                pair_r: r,
                feature_target_r: target_r[j],
                kept_target_r: target_r[k],
            }),
            None => kept.push(j),
        }
    }
    kept.sort_unstable();
    Ok(CorrelationStage { kept, audit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    pub algorithm: AlgorithmConfig,
    pub folds: usize,
    pub seed: u64,
    pub smote: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub features: Vec<String>,
    pub mean_minority_f1: f64,
    /// Standard error of the fold scores.
    #[serde(default)]
    pub std_error: f64,
}

fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeOutcome {
    pub selected: Vec<String>,
    pub steps: Vec<RfeStep>,
    pub audit: Vec<AuditEntry>,
}

/// Recursive feature elimination over the feature groups of `design`.
/// Each round scores the current set by cross-validated minority-class F1,
/// then drops the group with the lowest summed importance from a model fitted
/// on all rows. Returns the smallest set scoring within one standard error
/// of the best, so chance gains from noise columns do not keep them.
pub fn rfe_cv(design: &Design, y: &[bool], config: &RfeConfig) -> Result<RfeOutcome, FeatureError> {
    let pos = y.iter().filter(|&&b| b).count();
    let minority = pos * 2 < y.len();
    let mut active: Vec<usize> = (0..design.groups.len())
        .filter(|&g| !design.groups[g].1.is_empty())
        .collect();
    if active.is_empty() {
        return Ok(RfeOutcome { selected: Vec::new(), steps: Vec::new(), audit: Vec::new() });
    }
    let eval = EvalConfig {
        algorithm: config.algorithm,
        seed: config.seed,
        repeats: 1,
        folds: config.folds,
        smote: config.smote,
    };
    let mut steps = Vec::new();
    let mut audit = Vec::new();
    loop {
        let cols: Vec<usize> = active.iter().flat_map(|&g| design.groups[g].1.clone()).collect();
        let xs = design.x.select_columns(&cols);
        let report = cross_validate(&xs, y, &eval)?;
        let f1 = report.means_for(minority);
        let scores = report.column(|r| r.class(minority).f1);
        steps.push(RfeStep {
            features: active.iter().map(|&g| design.groups[g].0.clone()).collect(),
            mean_minority_f1: f1,
            std_error: std_error(&scores),
        });
        if active.len() == 1 {
            break;
        }

        let model = if config.smote {
            let o = smote(&xs, y, SMOTE_K, config.seed)?;
            train(&config.algorithm, &o.x, &o.y, config.seed)?
        } else {
            train(&config.algorithm, &xs, y, config.seed)?
        };
        let imp = model.importances();
        let mut at = 0;
        let mut weakest = (0, f64::INFINITY);
        for (pos, &g) in active.iter().enumerate() {
            let width = design.groups[g].1.len();
            let total: f64 = imp[at..at + width].iter().sum();
            at += width;
            if total <= weakest.1 {
                weakest = (pos, total);
            }
        }
        let g = active.remove(weakest.0);
        audit.push(AuditEntry::Eliminated {
            step: steps.len() - 1,
            feature: design.groups[g].0.clone(),
            importance: weakest.1,
            mean_f1: f1,
        });
    }
    let top = steps
        .iter()
        .max_by(|a, b| a.mean_minority_f1.total_cmp(&b.mean_minority_f1))
        .map(|s| s.mean_minority_f1 - s.std_error)
        .unwrap_or(f64::NEG_INFINITY);
    // steps shrink by one group each, so the last qualifying step is the smallest
    let best = steps.iter().rposition(|s| s.mean_minority_f1 >= top).unwrap_or(0);
    Ok(RfeOutcome {
        selected: steps[best].features.clone(),
        steps,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub kept_after_correlation: Vec<String>,
    pub final_selected: Vec<String>,
    pub audit: Vec<AuditEntry>,
    pub rfe_steps: Vec<RfeStep>,
}

impl FeatureSelection {
    /// Runs correlation pruning on the scalar features and, when `rfe` is
    /// given, recursive elimination over the survivors plus the TF-IDF block.
    pub fn fit(
        vectors: &[FeatureVector],
        y: &[bool],
        tfidf_dim: usize,
        threshold: f64,
        rfe: Option<&RfeConfig>,
    ) -> Result<FeatureSelection, FeatureError> {
        let stage = drop_correlated(&scalar_matrix(vectors), &SCALAR_NAMES, y, threshold)?;
        let mut kept: Vec<String> = Vec::new();
        if tfidf_dim > 0 {
            kept.push(TFIDF.to_string());
        }
        kept.extend(stage.kept.iter().map(|&j| SCALAR_NAMES[j].to_string()));
        let mut audit = stage.audit;
        let (final_selected, rfe_steps) = match rfe {
            Some(cfg) => {
                let design = design_matrix(vectors, &kept, tfidf_dim)?;
                let out = rfe_cv(&design, y, cfg)?;
                audit.extend(out.audit);
                (out.selected, out.steps)
            }
            None => (kept.clone(), Vec::new()),
        };
        Ok(FeatureSelection {
            kept_after_correlation: kept,
            final_selected,
            audit,
            rfe_steps,
        })
    }
}
