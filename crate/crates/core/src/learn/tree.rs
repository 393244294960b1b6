//! CART classification tree with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 16,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        p_useful: f64,
        samples: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
    /// Gini importance per feature, normalized to sum 1 (all zeros for a
    /// single-leaf tree).
    pub importances: Vec<f64>,
}

impl DecisionTree {
    pub fn fit<R: Rng>(x: &Matrix, y: &[bool], params: &TreeParams, rng: &mut R) -> DecisionTree {
        Self::fit_rows(x, y, (0..x.rows()).collect(), params, rng)
    }

    /// Fits on the given row indices, which may repeat.
    pub fn fit_rows<R: Rng>(
        x: &Matrix,
        y: &[bool],
        mut rows: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> DecisionTree {
        let mut b = Builder {
            x,
            y,
            params,
            k: params.max_features.resolve(x.cols()),
            feats: (0..x.cols()).collect(),
            buf: Vec::with_capacity(rows.len()),
            nodes: Vec::new(),
            importances: vec![0.0; x.cols()],
        };
        b.build(&mut rows, 0, rng);
        let total: f64 = b.importances.iter().sum();
        if total > 0.0 {
            for v in &mut b.importances {
                *v /= total;
            }
        }
        DecisionTree {
            n_features: x.cols(),
            nodes: b.nodes,
            importances: b.importances,
        }
    }

    /// A tree that always answers `p_useful`.
    pub fn constant(n_features: usize, p_useful: f64, samples: u32) -> DecisionTree {
        DecisionTree {
            n_features,
            nodes: vec![Node::Leaf { p_useful, samples }],
            importances: vec![0.0; n_features],
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p_useful, .. } => return *p_useful,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `n * gini` for a node with `pos` positives out of `n`.
fn weighted_gini(n: f64, pos: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    n * 2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    params: &'a TreeParams,
    k: usize,
    feats: Vec<usize>,
    buf: Vec<(f64, bool)>,
    nodes: Vec<Node>,
    importances: Vec<f64>,
}

impl Builder<'_> {
    fn build<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> u32 {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i]).count();
        let id = self.nodes.len() as u32;
        let leaf = Node::Leaf {
            p_useful: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            samples: n as u32,
        };
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || n < self.params.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let Some(best) = self.best_split(rows, pos, rng) else {
            return id;
        };
        self.importances[best.feature] += weighted_gini(n as f64, pos as f64) - best.score;

        let mut split = 0;
        for i in 0..n {
            if self.x.get(rows[i], best.feature) <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Examines features in random order until `k` non-constant ones have
    /// been evaluated (or all features are exhausted).
    fn best_split<R: Rng>(&mut self, rows: &[usize], pos: usize, rng: &mut R) -> Option<BestSplit> {
        let d = self.feats.len();
        let n = rows.len() as f64;
        let total_pos = pos as f64;
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        let mut i = 0;
        while i < d && evaluated < self.k {
            if self.k < d {
                let j = rng.gen_range(i..d);
                self.feats.swap(i, j);
            }
            let f = self.feats[i];
            i += 1;

            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[self.buf.len() - 1].0 {
                continue;
            }
            evaluated += 1;

            let (mut ln, mut lp) = (0.0, 0.0);
            for t in 0..self.buf.len() - 1 {
                ln += 1.0;
                if self.buf[t].1 {
                    lp += 1.0;
                }
                let (a, b) = (self.buf[t].0, self.buf[t + 1].0);
                if a == b {
                    continue;
                }
                let score = weighted_gini(ln, lp) + weighted_gini(n - ln, total_pos - lp);
                if best.as_ref().map_or(true, |bs| score < bs.score) {
                    let mid = a + (b - a) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        score,
                    });
                }
            }
        }
        best
    }
}
