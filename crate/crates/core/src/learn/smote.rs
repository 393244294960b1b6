//! Synthetic minority oversampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LearnError, Matrix};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Oversampled {
    /// Original rows first, then the synthetic ones.
    pub x: Matrix,
    pub y: Vec<bool>,
    pub n_original: usize,
    /// For each synthetic row: base row, neighbor row (both original
    /// indices) and the interpolation factor.
    pub parents: Vec<(usize, usize, f64)>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Adds interpolated minority rows until both classes have the same count.
/// Each synthetic row is `x + λ·(nb − x)` with `x` a random minority row,
/// `nb` one of its `k` nearest minority neighbors and `λ ~ U[0, 1]`.
pub fn smote(x: &Matrix, y: &[bool], k: usize, seed: u64) -> Result<Oversampled, LearnError> {
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch(x.rows(), y.len()));
    }
    let pos = y.iter().filter(|&&b| b).count();
    let neg = y.len() - pos;
    let mut out = Oversampled {
        x: x.clone(),
        y: y.to_vec(),
        n_original: y.len(),
        parents: Vec::new(),
    };
    if pos == neg {
        return Ok(out);
    }
    let minority_label = pos < neg;
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    match minority.len() {
        0 => return Err(LearnError::SingleClassTraining),
        1 => return Err(LearnError::SingleMinoritySample),
        _ => {}
    }
    let k = k.clamp(1, minority.len() - 1);

    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (sq_dist(x.row(i), x.row(j)), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let need = pos.abs_diff(neg);
    let mut row = vec![0.0; x.cols()];
    for _ in 0..need {
        let a = rng.gen_range(0..minority.len());
        let base = minority[a];
        let nb = neighbors[a][rng.gen_range(0..k)];
        let lambda: f64 = rng.gen();
        for (j, v) in row.iter_mut().enumerate() {
            let (p, q) = (x.get(base, j), x.get(nb, j));
            *v = p + lambda * (q - p);
        }
        out.x.push_row(&row);
        out.y.push(minority_label);
        out.parents.push((base, nb, lambda));
    }
    Ok(out)
}
