//! Comparison scorers: softmax/logit confidences and an exhaustive KNN
//! detector over a training feature bank.
//!
//! Every score follows the same convention as the subspace score: higher
//! means more in-distribution, so one thresholding rule covers all methods.
//! The logit scorers are O(C) per sample; KNN is O(N_tr·D) — it must scan
//! the whole bank — which is exactly the contrast the benchmark measures.

use thiserror::Error;

use crate::metrics::{Fingerprint, ScoredBatch};
use crate::tensor::{slice_l2_norm, Matrix, TensorError, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("feature bank is empty")]
    EmptyBank,
    #[error("bank row {row} has zero norm and cannot be unit-normalized")]
    ZeroBankRow { row: usize },
    #[error("k={k} outside [1, {n_bank}]")]
    BadK { k: usize, n_bank: usize },
    #[error("feature has {got} dims but the bank holds {expected}-dim rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("logit rows must have at least one class column")]
    NoClasses,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Maximum softmax probability, computed with max-subtraction so huge logits
/// cannot overflow: the winning class keeps probability 1/Σexp(lᵢ−max).
pub fn msp_score(logits: &[f64]) -> f64 {
    let max = max_of(logits);
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    1.0 / sum_exp
}

/// log Σ exp(logitᵢ), max-subtracted; higher = more in-distribution.
pub fn energy_score(logits: &[f64]) -> f64 {
    let max = max_of(logits);
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    max + sum_exp.ln()
}

/// The highest raw logit.
pub fn maxlogit_score(logits: &[f64]) -> f64 {
    max_of(logits)
}

fn max_of(logits: &[f64]) -> f64 {
    assert!(!logits.is_empty(), "logit scorers need at least one class");
    logits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `Z·W`: turns an N×D feature batch into N×C logits, for running the logit
/// scorers when only features and weights were exported.
pub fn logits_from_features(features: &Matrix, weights: &Matrix) -> Result<Matrix, TensorError> {
    features.matmul(weights)
}

/// Training features for the KNN baseline, unit-normalized at ingestion.
#[derive(Debug, Clone)]
pub struct FeatureBank {
    features: Matrix,
    source: String,
}

impl FeatureBank {
    /// Normalizes every row to unit length; rejects empty banks and zero
    /// rows (they have no direction to compare against).
    pub fn new(features: Matrix, source: &str) -> Result<Self, BaselineError> {
        if features.rows() == 0 {
            return Err(BaselineError::EmptyBank);
        }
        for i in 0..features.rows() {
            if slice_l2_norm(features.row(i)) == 0.0 {
                return Err(BaselineError::ZeroBankRow { row: i });
            }
        }
        Ok(Self {
            features: features.normalize_rows(),
            source: source.to_string(),
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Negative Euclidean distance from normalized `z` to its k-th nearest bank
/// row. Exhaustive: every bank row is visited, so the cost per sample is
/// O(N_tr·D).
pub fn knn_score(z: &Vector, bank: &FeatureBank, k: usize) -> Result<f64, BaselineError> {
    check_knn_args(z.len(), bank, k)?;
    let zn = normalized_copy(z.data());
    Ok(row_knn_score(&zn, bank, k))
}

/// Per-row [`knn_score`] over a feature batch; order-preserving.
pub fn knn_batch(
    features: &Matrix,
    bank: &FeatureBank,
    k: usize,
) -> Result<ScoredBatch, BaselineError> {
    if features.rows() > 0 {
        check_knn_args(features.cols(), bank, k)?;
    } else if k == 0 || k > bank.len() {
        return Err(BaselineError::BadK {
            k,
            n_bank: bank.len(),
        });
    }
    let mut scores = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        let zn = normalized_copy(features.row(i));
        scores.push(row_knn_score(&zn, bank, k));
    }
    Ok(ScoredBatch {
        scores: Vector::from_vec(scores)?,
        fingerprint: knn_fingerprint(k),
        ns_per_sample: None,
    })
}

pub fn knn_fingerprint(k: usize) -> Fingerprint {
    Fingerprint {
        k: Some(k),
        ..Fingerprint::bare("knn")
    }
}

fn check_knn_args(dim: usize, bank: &FeatureBank, k: usize) -> Result<(), BaselineError> {
    if k == 0 || k > bank.len() {
        return Err(BaselineError::BadK {
            k,
            n_bank: bank.len(),
        });
    }
    if dim != bank.dim() {
        return Err(BaselineError::DimensionMismatch {
            expected: bank.dim(),
            got: dim,
        });
    }
    Ok(())
}

fn normalized_copy(row: &[f64]) -> Vec<f64> {
    let norm = slice_l2_norm(row);
    if norm > 0.0 {
        row.iter().map(|x| x / norm).collect()
    } else {
        row.to_vec()
    }
}

fn row_knn_score(zn: &[f64], bank: &FeatureBank, k: usize) -> f64 {
    let n = bank.len();
    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum_sq = 0.0;
        for (a, b) in zn.iter().zip(bank.features.row(i)) {
            let d = a - b;
            sum_sq += d * d;
        }
        dists.push(sum_sq.sqrt());
    }
    let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    -*kth
}

/// Batch wrapper for one logit scorer; each row of `logits` is one sample.
pub fn logit_batch(
    logits: &Matrix,
    score_row: fn(&[f64]) -> f64,
    method: &str,
) -> Result<ScoredBatch, BaselineError> {
    if logits.rows() > 0 && logits.cols() == 0 {
        return Err(BaselineError::NoClasses);
    }
    let scores: Vec<f64> = (0..logits.rows()).map(|i| score_row(logits.row(i))).collect();
    Ok(ScoredBatch {
        scores: Vector::from_vec(scores)?,
        fingerprint: Fingerprint::bare(method),
        ns_per_sample: None,
    })
}
