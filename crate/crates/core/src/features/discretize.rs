//! Quantile binning of ratio-scale features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{scalar_index, FeatureError, FeatureVector};

pub const DEFAULT_BINS: usize = 4;

/// Features replaced by their quantile bin index.
pub const DISCRETIZED: [&str; 10] = [
    "review_interval",
    "similarity",
    "readability",
    "line_change",
    "word_count",
    "thread_length",
    "code_reviewership",
    "code_ownership",
    "reviewing_experience",
    "developer_experience",
];

/// Bin edges per feature, from the training data's quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub bins: usize,
    pub edges: BTreeMap<String, Vec<f64>>,
}

/// Quantile at `p ∈ [0, 1]` of sorted data, interpolating linearly between
/// order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_discretizer(training: &[FeatureVector], bins: usize) -> Result<Discretizer, FeatureError> {
    if training.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let bins = bins.max(1);
    let mut edges = BTreeMap::new();
    for name in DISCRETIZED {
        let i = scalar_index(name).expect("discretized feature is a scalar");
        let mut values: Vec<f64> = training.iter().map(|v| v.scalars[i]).collect();
        values.sort_by(f64::total_cmp);
        let mut e: Vec<f64> = (0..=bins).map(|k| quantile(&values, k as f64 / bins as f64)).collect();
        e.dedup();
        edges.insert(name.to_string(), e);
    }
    Ok(Discretizer { bins, edges })
}

impl Discretizer {
    /// Bin index of `v` given edges `e_0 < … < e_m`: bins are `[e_0, e_1]`,
    /// `(e_1, e_2]`, …, and out-of-range values clamp to the end bins.
    pub fn bin(edges: &[f64], v: f64) -> usize {
        if edges.len() < 2 {
            return 0;
        }
        edges[1..edges.len() - 1].iter().filter(|&&e| e < v).count()
    }

    pub fn apply(&self, fv: &FeatureVector) -> FeatureVector {
        let mut out = fv.clone();
        for (name, edges) in &self.edges {
            if let Some(i) = scalar_index(name) {
                out.scalars[i] = Self::bin(edges, fv.scalars[i]) as f64;
            }
        }
        out
    }
}
