//! Human-readable reports.

use std::fmt::Write;
use std::path::Path;

use serde::Serialize;

use cra_core::features::{AuditEntry, FeatureSelection};
use cra_core::metrics::{EntityKind, RankingResult, ReviewerPeriodMetrics};
use cra_core::pipeline::{EvaluationOutcome, TrainingOutcome};

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

#[derive(Debug, Serialize)]
pub struct TrainSummary<'a> {
    pub model_version: &'a str,
    pub artifact: String,
    pub algorithm: String,
    pub samples: usize,
    pub useful: usize,
    pub selected_features: &'a [String],
    pub missing_code_context: usize,
    pub skipped_labels: &'a [String],
}

impl<'a> TrainSummary<'a> {
    pub fn new(o: &'a TrainingOutcome, version: &'a str, path: &Path) -> Self {
        TrainSummary {
            model_version: version,
            artifact: path.display().to_string(),
            algorithm: o.model.algorithm.to_string(),
            samples: o.samples,
            useful: o.useful,
            selected_features: &o.model.selected_features,
            missing_code_context: o.missing_code_context,
            skipped_labels: &o.skipped_labels,
        }
    }
}

pub fn train_text(o: &TrainingOutcome, version: &str, path: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {version} written to {}", path.display());
    let _ = writeln!(s, "trained on {} labeled comments ({} useful)", o.samples, o.useful);
    let _ = writeln!(s, "features ({}): {}", o.model.selected_features.len(), o.model.selected_features.join(", "));
    if o.missing_code_context > 0 {
        let _ = writeln!(s, "warning: {} comments had no code context", o.missing_code_context);
    }
    if !o.skipped_labels.is_empty() {
        let _ = writeln!(s, "warning: {} labels name comments not in the store", o.skipped_labels.len());
    }
    s
}

/// Mean scores per algorithm, in percent.
pub fn evaluation_table(o: &EvaluationOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>5} {:>9} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}",
        "algorithm", "folds", "accuracy", "U prec", "U rec", "U F1", "NU prec", "NU rec", "NU F1"
    );
    for r in &o.reports {
        let m = &r.means;
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>9} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}",
            r.config.algorithm.algorithm().to_string(),
            r.rows.len(),
            pct(m.accuracy),
            pct(m.useful.precision),
            pct(m.useful.recall),
            pct(m.useful.f1),
            pct(m.not_useful.precision),
            pct(m.not_useful.recall),
            pct(m.not_useful.f1),
        );
    }
    let _ = writeln!(s, "U = useful, NU = not useful; means over all folds, in percent");
    s
}

/// Pairwise fold-matched comparisons: mean difference in percentage points
/// and the p-value of the chosen test.
pub fn comparison_table(o: &EvaluationOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:<14} {:>10} {:<10} {:>10}", "pair", "metric", "delta", "test", "p-value");
    for c in &o.comparisons {
        let _ = writeln!(
            s,
            "{:<10} {:<14} {:>+10.2} {:<10} {:>10.4}",
            format!("{}-{}", c.a, c.b),
            c.metric,
            100.0 * c.result.mean_delta,
            c.result.test_used,
            c.result.p_value
        );
    }
    s
}

pub fn selection_audit(sel: &FeatureSelection) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "after correlation pruning: {}", sel.kept_after_correlation.join(", "));
    for entry in &sel.audit {
        let _ = match entry {
            AuditEntry::DroppedDegenerate { feature } => writeln!(s, "  dropped {feature}: constant"),
            AuditEntry::DroppedCorrelated {
                feature,
                correlated_with,
                pair_r,
                feature_target_r,
                kept_target_r,
            } => writeln!(
                s,
                "  dropped {feature}: r = {pair_r:.3} with {correlated_with} (target r {feature_target_r:.3} vs {kept_target_r:.3})"
            ),
            AuditEntry::Eliminated {
                step,
                feature,
                importance,
                mean_f1,
            } => writeln!(
                s,
                "  step {step}: eliminated {feature} (importance {importance:.4}, minority F1 {mean_f1:.4})"
            ),
        };
    }
    for (i, step) in sel.rfe_steps.iter().enumerate() {
        let _ = writeln!(s, "  rfe step {i}: {} features, minority F1 {:.4}", step.features.len(), step.mean_minority_f1);
    }
    let _ = writeln!(s, "selected: {}", sel.final_selected.join(", "));
    s
}

pub fn ranking_table(list: &[ReviewerPeriodMetrics], ranking: &RankingResult, kind: EntityKind) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4}  {:<16} {:>5} {:>5} {:>5} {:>7} {:>7} {:>8} {:>6} {:>5}",
        "rank",
        kind.id_column(),
        "NR",
        "NC",
        "UC",
        "CUD",
        "ID",
        "RE",
        "RI",
        "score"
    );
    for e in &ranking.entries {
        let Some(m) = list.iter().find(|m| m.entity_id == e.entity_id) else {
            continue;
        };
        let _ = writeln!(
            s,
            "{:>4}  {:<16} {:>5} {:>5} {:>5} {:>7.4} {:>7.4} {:>8.4} {:>6} {:>5}",
            e.rank, m.entity_id, m.nr, m.nc, m.uc, m.cud, m.id, m.re, m.ri, m.review_score
        );
    }
    s
}
