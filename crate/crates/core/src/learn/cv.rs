//! Repeated stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{smote, train, AlgorithmConfig, LearnError, Matrix, Oversampled, SMOTE_K};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub algorithm: AlgorithmConfig,
    pub seed: u64,
    pub repeats: usize,
    pub folds: usize,
    /// Oversample the minority class in each training partition.
    pub smote: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Useful predicted useful.
    pub tp: u32,
    /// Not useful predicted useful.
    pub fp: u32,
    pub tn: u32,
    pub fn_: u32,
}

impl Confusion {
    pub fn total(&self) -> u32 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn useful(&self) -> ClassScores {
        ClassScores::from_counts(self.tp, self.fp, self.fn_)
    }

    pub fn not_useful(&self) -> ClassScores {
        ClassScores::from_counts(self.tn, self.fn_, self.fp)
    }
}

fn ratio(a: u32, b: u32) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassScores {
    /// Scores for one class; any zero denominator yields 0.
    pub fn from_counts(tp: u32, fp: u32, fn_: u32) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub useful: ClassScores,
    pub not_useful: ClassScores,
    pub confusion: Confusion,
}

impl FoldScore {
    pub fn from_confusion(repeat: usize, fold: usize, confusion: Confusion) -> Self {
        FoldScore {
            repeat,
            fold,
            accuracy: confusion.accuracy(),
            useful: confusion.useful(),
            not_useful: confusion.not_useful(),
            confusion,
        }
    }

    pub fn class(&self, useful: bool) -> &ClassScores {
        if useful {
            &self.useful
        } else {
            &self.not_useful
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub accuracy: f64,
    pub useful: ClassScores,
    pub not_useful: ClassScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: EvalConfig,
    pub rows: Vec<FoldScore>,
    pub means: MeanScores,
}

impl EvaluationReport {
    pub fn new(config: EvalConfig, rows: Vec<FoldScore>) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = |f: &dyn Fn(&FoldScore) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let class_mean = |useful: bool| ClassScores {
            precision: mean(&|r| r.class(useful).precision),
            recall: mean(&|r| r.class(useful).recall),
            f1: mean(&|r| r.class(useful).f1),
        };
        let means = MeanScores {
            accuracy: mean(&|r| r.accuracy),
            useful: class_mean(true),
            not_useful: class_mean(false),
        };
        EvaluationReport { config, rows, means }
    }

    /// Mean F1 of one class.
    pub fn means_for(&self, useful: bool) -> f64 {
        if useful {
            self.means.useful.f1
        } else {
            self.means.not_useful.f1
        }
    }

    /// One value per fold, in row order.
    pub fn column(&self, f: impl Fn(&FoldScore) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the oversampler and learner of one fold.
pub(crate) fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    splitmix(seed ^ splitmix((repeat as u64) << 32 | fold as u64))
}

fn check_counts(y: &[bool], folds: usize) -> Result<(), LearnError> {
    let pos = y.iter().filter(|&&b| b).count();
    let smaller = pos.min(y.len() - pos);
    let needed = folds.max(2);
    if smaller < needed {
        return Err(LearnError::TooFewSamples { needed, got: smaller });
    }
    Ok(())
}

/// Test-fold index of every sample for one repeat. Each class is shuffled
/// separately and dealt round-robin, so every fold holds each class's count
/// to within one sample. Depends only on `(y, folds, seed, repeat)`.
pub fn fold_assignments(y: &[bool], folds: usize, seed: u64, repeat: usize) -> Result<Vec<usize>, LearnError> {
    check_counts(y, folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64);
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut out = vec![0; y.len()];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        out[i] = k % folds;
    }
    Ok(out)
}

/// Training and test partitions of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldData {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Training partition, oversampled when enabled. Rows past
    /// `train.n_original` are synthetic; `train.parents` index into
    /// `train_rows`.
    pub train: Oversampled,
}

pub fn fold_data(
    x: &Matrix,
    y: &[bool],
    assignment: &[usize],
    fold: usize,
    oversample: bool,
    seed: u64,
) -> Result<FoldData, LearnError> {
    let train_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != fold).collect();
    let test_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == fold).collect();
    let tx = x.select_rows(&train_rows);
    let ty: Vec<bool> = train_rows.iter().map(|&i| y[i]).collect();
    let train = if oversample {
        smote(&tx, &ty, SMOTE_K, seed)?
    } else {
        Oversampled {
            n_original: ty.len(),
            x: tx,
            y: ty,
            parents: Vec::new(),
        }
    };
    Ok(FoldData {
        train_rows,
        test_rows,
        train,
    })
}

fn run_fold(
    x: &Matrix,
    y: &[bool],
    assignment: &[usize],
    config: &EvalConfig,
    repeat: usize,
    fold: usize,
) -> Result<FoldScore, LearnError> {
    let seed = fold_seed(config.seed, repeat, fold);
    let data = fold_data(x, y, assignment, fold, config.smote, seed)?;
    let model = train(&config.algorithm, &data.train.x, &data.train.y, seed)?;
    let mut c = Confusion::default();
    for &i in &data.test_rows {
        match (y[i], model.predict(x.row(i))?) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(FoldScore::from_confusion(repeat, fold, c))
}

/// `repeats × folds` rows, ordered by repeat then fold. Fold membership and
/// oversampling depend only on the seed, so different algorithms evaluated
/// with the same seed see identical partitions.
pub fn cross_validate(x: &Matrix, y: &[bool], config: &EvalConfig) -> Result<EvaluationReport, LearnError> {
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch(x.rows(), y.len()));
    }
    if !x.is_finite() {
        return Err(LearnError::NonFiniteFeature);
    }
    let mut rows = Vec::with_capacity(config.repeats * config.folds);
    for repeat in 0..config.repeats {
        let assignment = fold_assignments(y, config.folds, config.seed, repeat)?;
        let scores: Result<Vec<FoldScore>, LearnError> = (0..config.folds)
            .into_par_iter()
            .map(|fold| run_fold(x, y, &assignment, config, repeat, fold))
            .collect();
        rows.extend(scores?);
    }
    Ok(EvaluationReport::new(*config, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{Algorithm, TreeParams};

    fn labels(n: usize, pos_every: usize) -> Vec<bool> {
        (0..n).map(|i| i % pos_every != 0).collect()
    }

    #[test]
    fn class_scores_from_counts() {
        let c = Confusion { tp: 8, fp: 2, tn: 5, fn_: 1 };
        assert!((c.accuracy() - 13.0 / 16.0).abs() < 1e-12);
        assert!((c.useful().precision - 0.8).abs() < 1e-12);
        assert!((c.useful().recall - 8.0 / 9.0).abs() < 1e-12);
        assert!((c.not_useful().precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((c.not_useful().recall - 5.0 / 7.0).abs() < 1e-12);
        let none = ClassScores::from_counts(0, 0, 3);
        assert_eq!(none, ClassScores::default());
    }

    #[test]
    fn folds_partition_and_stratify() {
        let y = labels(203, 5);
        let a = fold_assignments(&y, 10, 42, 0).unwrap();
        for f in 0..10 {
            let pos = (0..y.len()).filter(|&i| a[i] == f && y[i]).count();
            let neg = (0..y.len()).filter(|&i| a[i] == f && !y[i]).count();
            assert!((16..=17).contains(&pos), "fold {f}: {pos}");
            assert!((4..=5).contains(&neg), "fold {f}: {neg}");
        }
        assert_ne!(a, fold_assignments(&y, 10, 42, 1).unwrap());
        assert_eq!(a, fold_assignments(&y, 10, 42, 0).unwrap());
    }

    #[test]
    fn too_few_samples() {
        let y = labels(50, 10);
        assert_eq!(
            fold_assignments(&y, 10, 0, 0),
            Err(LearnError::TooFewSamples { needed: 10, got: 5 })
        );
    }

    #[test]
    fn synthetic_rows_only_come_from_training_rows() {
        let y = labels(100, 4);
        let x = Matrix::from_rows(&(0..100).map(|i| [i as f64, (i * 7 % 13) as f64]).collect::<Vec<_>>());
        let a = fold_assignments(&y, 5, 1, 0).unwrap();
        let d = fold_data(&x, &y, &a, 2, true, 9).unwrap();
        assert!(d.train.x.rows() > d.train_rows.len());
        for &(p, q, _) in &d.train.parents {
            let (p, q) = (d.train_rows[p], d.train_rows[q]);
            assert!(a[p] != 2 && a[q] != 2);
        }
        assert!(d.test_rows.iter().all(|&i| a[i] == 2));
    }

    #[test]
    fn report_shape() {
        let y = labels(60, 3);
        let x = Matrix::from_rows(&(0..60).map(|i| [(i % 3) as f64, i as f64]).collect::<Vec<_>>());
        let config = EvalConfig {
            algorithm: AlgorithmConfig::DecisionTree(TreeParams::default()),
            seed: 3,
            repeats: 2,
            folds: 5,
            smote: true,
        };
        let r = cross_validate(&x, &y, &config).unwrap();
        assert_eq!(r.rows.len(), 10);
        assert_eq!((r.rows[7].repeat, r.rows[7].fold), (1, 2));
        assert_eq!(r.means.accuracy, 1.0);
        assert_eq!(config.algorithm.algorithm(), Algorithm::DecisionTree);
    }
}
