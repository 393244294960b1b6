//! Shapiro-Wilk normality test and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::LearnError;

/// Sample sizes up to this use the exact signed-rank distribution.
pub const EXACT_MAX_N: usize = 25;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Horner evaluation of `c[0] + c[1] x + ...`.
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

/// Royston's approximation (algorithm AS R94), valid for 3 ≤ n ≤ 5000.
/// A constant sample is reported as `W = 1, p = 1`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk, LearnError> {
    let n = sample.len();
    if n < 3 {
        return Err(LearnError::TooFewSamples { needed: 3, got: n });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFiniteFeature);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Ok(ShapiroWilk { w: 1.0, p_value: 1.0 });
    }

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let nf = n as f64;
    let half = n / 2;
    let norm = std_normal();

    // coefficients for the lower half; the upper half mirrors them
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=half)
            .map(|i| norm.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first..half {
            a[i] = -m[i] / fac;
        }
    }

    let mean = x.iter().sum::<f64>() / nf;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / ss).min(1.0);

    let p_value = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        (pi6 * (w.sqrt().asin() - stqr)).max(0.0)
    } else {
        let y = (1.0 - w).ln();
        let (y, mu, sigma) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok(ShapiroWilk { w, p_value: 1e-99 });
            }
            let y = -(gamma - y).ln();
            (y, poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp())
        } else {
            let ln_n = nf.ln();
            (y, poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n), poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp())
        };
        Normal::new(mu, sigma).expect("positive scale").sf(y)
    };
    Ok(ShapiroWilk { w, p_value: p_value.clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Smaller of the positive and negative rank sums.
    pub statistic: f64,
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, plus the sizes of tied groups.
fn rank_with_ties(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided paired signed-rank test on `a − b`. Zero differences are
/// dropped; if none remain the p-value is 1. Up to [`EXACT_MAX_N`]
/// differences the p-value is exact (ties included), beyond that it uses the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon(a: &[f64], b: &[f64]) -> Result<Wilcoxon, LearnError> {
    if a.len() != b.len() {
        return Err(LearnError::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFiniteFeature);
    }
    let n = d.len();
    if n == 0 {
        return Ok(Wilcoxon { statistic: 0.0, p_value: 1.0, n: 0, exact: true });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = rank_with_ties(&abs);
    let r_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let t = r_plus.min(total - r_plus);

    if n <= EXACT_MAX_N {
        // Ranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut dist = vec![0.0f64; max + 1];
        dist[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max).rev() {
                dist[s] += dist[s - r];
            }
        }
        let limit = (t * 2.0).round() as usize;
        let count: f64 = dist[..=limit].iter().sum();
        let p = 2.0 * count / 2f64.powi(n as i32);
        return Ok(Wilcoxon { statistic: t, p_value: p.min(1.0), n, exact: true });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let z = ((t - mean).abs() - 0.5).max(0.0) / sd;
    let p = 2.0 * std_normal().sf(z);
    Ok(Wilcoxon { statistic: t, p_value: p.min(1.0), n, exact: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    /// Shapiro-Wilk p-values; `None` for fewer than three scores.
    pub shapiro_p_a: Option<f64>,
    pub shapiro_p_b: Option<f64>,
    pub test_used: String,
    pub statistic: f64,
    pub p_value: f64,
    pub mean_delta: f64,
}

/// Compares two score vectors paired by fold.
pub fn compare(a: &[f64], b: &[f64]) -> Result<StatTestResult, LearnError> {
    if a.len() != b.len() {
        return Err(LearnError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(LearnError::TooFewSamples { needed: 1, got: 0 });
    }
    let sw = |s: &[f64]| shapiro_wilk(s).ok().map(|r| r.p_value);
    let w = wilcoxon(a, b)?;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(StatTestResult {
        shapiro_p_a: sw(a),
        shapiro_p_b: sw(b),
        test_used: "wilcoxon_signed_rank".to_string(),
        statistic: w.statistic,
        p_value: w.p_value,
        mean_delta: mean(a) - mean(b),
    })
}
