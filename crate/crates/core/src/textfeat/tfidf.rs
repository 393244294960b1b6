//! TF-IDF vectorization and cosine similarity.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_TERMS: usize = 500;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TfidfError {
    #[error("cannot fit a vectorizer on an empty corpus")]
    EmptyCorpus,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Sparse vector with entries sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> Result<f64, TfidfError> {
        if self.dim != other.dim {
            return Err(TfidfError::DimensionMismatch(self.dim, other.dim));
        }
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(acc)
    }
}

/// Cosine of the angle between two vectors; 0 when either is all zeros.
/// Results are clamped to `[0, 1]`.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> Result<f64, TfidfError> {
    let dot = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Fitted vocabulary with smoothed inverse document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    pub vocabulary: BTreeMap<String, u32>,
    pub idf: Vec<f64>,
}

impl Vectorizer {
    /// Keeps the `max_terms` terms with the highest document frequency
    /// (ties broken lexicographically) and assigns indices in term order.
    pub fn fit<D, T>(corpus: &[D], max_terms: usize) -> Result<Self, TfidfError>
    where
        D: AsRef<[T]>,
        T: AsRef<str>,
    {
        if corpus.is_empty() {
            return Err(TfidfError::EmptyCorpus);
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            let unique: HashSet<&str> = doc.as_ref().iter().map(|t| t.as_ref()).collect();
            for term in unique {
                *df.entry(term).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_terms);
        ranked.sort_by(|a, b| a.0.cmp(b.0));

        let n = corpus.len() as f64;
        let vocabulary = ranked
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.to_string(), i as u32))
            .collect();
        let idf = ranked
            .iter()
            .map(|(_, df)| idf_weight(n, *df as f64))
            .collect();
        Ok(Vectorizer { vocabulary, idf })
    }

    /// Fits on raw texts using [`super::words`].
    pub fn fit_texts<S: AsRef<str>>(corpus: &[S], max_terms: usize) -> Result<Self, TfidfError> {
        let docs: Vec<Vec<String>> = corpus.iter().map(|t| super::words(t.as_ref())).collect();
        Self::fit(&docs, max_terms)
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// L2-normalized tf·idf weights; unknown terms are ignored.
    pub fn transform<T: AsRef<str>>(&self, tokens: &[T]) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.get(t.as_ref()) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, tf)| (i, tf * self.idf[i as usize]))
            .collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector { dim: self.dim(), entries }
    }

    pub fn transform_text(&self, text: &str) -> SparseVector {
        self.transform(&super::words(text))
    }
}

/// `ln((1 + n) / (1 + df)) + 1`
pub fn idf_weight(n_docs: f64, df: f64) -> f64 {
    ((1.0 + n_docs) / (1.0 + df)).ln() + 1.0
}
