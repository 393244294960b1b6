//! L2-regularized logistic regression fitted with L-BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Features are standardized with the training mean and standard deviation
/// before the linear model; both are stored so prediction is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticRegression {
    pub fn fit(x: &Matrix, y: &[bool], params: &LogisticParams) -> LogisticRegression {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            mean[j] = m;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        let mut z = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                z.set(i, j, (x.get(i, j) - mean[j]) / scale[j]);
            }
        }
        let penalty = 1.0 / (params.c * n as f64);
        let target: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

        // theta = [w_0 .. w_{d-1}, b]; the intercept is not penalized.
        let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let (w, b) = (&theta[..d], theta[d]);
            let mut loss = 0.0;
            for i in 0..n {
                let row = z.row(i);
                let zi = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
                loss += softplus(zi) - target[i] * zi;
                let r = sigmoid(zi) - target[i];
                for j in 0..d {
                    grad[j] += r * row[j];
                }
                grad[d] += r;
            }
            let inv_n = 1.0 / n as f64;
            grad.iter_mut().for_each(|g| *g *= inv_n);
            let mut reg = 0.0;
            for j in 0..d {
                reg += w[j] * w[j];
                grad[j] += penalty * w[j];
            }
            loss * inv_n + 0.5 * penalty * reg
        };
        let result = lbfgs(objective, vec![0.0; d + 1], params.tol, params.max_iter);
        LogisticRegression {
            mean,
            scale,
            weights: result.x[..d].to_vec(),
            intercept: result.x[d],
            iterations: result.iterations,
            converged: result.converged,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut z = self.intercept;
        for j in 0..self.weights.len() {
            z += self.weights[j] * (row[j] - self.mean[j]) / self.scale[j];
        }
        sigmoid(z)
    }

    /// Absolute standardized coefficients, normalized to sum 1.
    pub fn importances(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().map(|w| w.abs()).sum();
        self.weights
            .iter()
            .map(|w| if total > 0.0 { w.abs() / total } else { 0.0 })
            .collect()
    }
}

pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const HISTORY: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes a smooth function. Stops when the largest gradient component
/// is at most `tol`, or when the line search can no longer make progress.
pub(crate) fn lbfgs<F>(mut f: F, mut x: Vec<f64>, tol: f64, max_iter: usize) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x.len();
    let mut g = vec![0.0; dim];
    let mut fx = f(&x, &mut g);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];

    for iter in 0..max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            return LbfgsResult { x, iterations: iter, converged: true };
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = pairs
            .back()
            .map_or(1.0 / dot(&g, &g).sqrt().max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        let dir = if slope < 0.0 {
            dir
        } else {
            pairs.clear();
            slope = -dot(&g, &g);
            g.iter().map(|v| -v).collect()
        };

        // backtracking Armijo search
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..dim {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new <= fx + 1e-4 * step * slope {
                fx = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return LbfgsResult { x, iterations: iter, converged: false };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if pairs.len() == HISTORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
    }
    let converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol;
    LbfgsResult { x, iterations: max_iter, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let r = lbfgs(
            |p, g| {
                let (a, b) = (p[0], p[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            1e-8,
            1000,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn matches_reference_fit() {
        // Reference: scikit-learn LogisticRegression(C=1.0) on standardized x,
        // coef 0.869267, intercept 0.0.
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]);
        let y = [false, false, true, false, true, true];
        let m = LogisticRegression::fit(&x, &y, &LogisticParams::default());
        assert!(m.converged);
        assert!((m.weights[0] - 0.869267).abs() < 1e-5, "{}", m.weights[0]);
        assert!(m.intercept.abs() < 1e-6);
    }

    #[test]
    fn probabilities_are_stable_for_large_inputs() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
