//! Class-known subspace construction and projection-norm scoring.
//!
//! The classifier weight matrix `W ∈ R^{D×C}` is decomposed as `W = UΣVᵀ`;
//! the top-m left singular vectors `U_M` span the directions the classifier
//! distinguishes between classes. A feature row `z` is scored by
//! `S(x) = ‖zU_M‖₂` — how much of it survives projection into that span.
//! Equivalently, the reconstruction error `e(x) = −‖zU_MU_Mᵀ − z‖₂` measures
//! what is lost; the two are tied by `e(x) = −√(‖z‖² − S(x)²)`.
//!
//! Everything here is computed from `W` alone: no training features, no
//! fine-tuning, O(D·m) per sample regardless of training-set size.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::{Fingerprint, ScoredBatch};
use crate::tensor::{slice_l2_norm, svd, Matrix, SvdFactors, TensorError, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubspaceError {
    #[error("alpha must lie in (0, 1], got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("m override {m} outside [1, {k}]")]
    BadOverride { m: usize, k: usize },
    #[error("weight matrix is degenerate: all singular values are zero")]
    DegenerateWeights,
    #[error("feature has {got} dims but the subspace lives in {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// How to build and apply a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceConfig {
    /// Cumulative explained-variance ratio steering the rank cutoff.
    pub alpha: f64,
    /// L2-normalize each feature before scoring. On by default; with it the
    /// score is a bounded [0, 1] quantity. The flag is recorded in every
    /// fingerprint so scored batches are unambiguous.
    pub normalize_features: bool,
    /// Fixed rank overriding the alpha rule, in [1, min(D, C)].
    pub m_override: Option<usize>,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            normalize_features: true,
            m_override: None,
        }
    }
}

/// The class-known subspace extracted from one weight matrix.
#[derive(Debug, Clone)]
pub struct Subspace {
    /// D×m orthonormal basis (first m left singular vectors of W).
    pub u_m: Matrix,
    pub m: usize,
    /// Alpha the subspace was requested with (even when m was overridden).
    pub alpha_used: f64,
    /// All min(D, C) singular values, descending.
    pub sigma: Vector,
    /// Content hash of the source weights, carried into every fingerprint so
    /// scores from different subspaces can never be compared accidentally.
    pub weight_fingerprint: String,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.u_m.rows()
    }

    pub fn fingerprint(&self, normalize_features: bool) -> Fingerprint {
        Fingerprint {
            method: "clafr".to_string(),
            alpha: Some(self.alpha_used),
            m: Some(self.m),
            normalize: Some(normalize_features),
            k: None,
            weight_hash: Some(self.weight_fingerprint.clone()),
        }
    }
}

/// SHA-256 over the dimensions and little-endian payload of `w`.
pub fn weight_fingerprint(w: &Matrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update((w.rows() as u64).to_le_bytes());
    hasher.update((w.cols() as u64).to_le_bytes());
    for x in w.data() {
        hasher.update(x.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(7 + 64);
    out.push_str("sha256:");
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Smallest m whose leading partial sum strictly exceeds `alpha` times the
/// total; falls back to the count of nonzero singular values when rounding
/// denies the strict inequality (only reachable as alpha → 1).
pub fn select_m(sigma: &Vector, alpha: f64) -> Result<usize, SubspaceError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SubspaceError::BadAlpha { alpha });
    }
    debug_assert!(sigma.data().windows(2).all(|w| w[0] >= w[1]));
    debug_assert!(sigma.data().iter().all(|&s| s >= 0.0));
    let total: f64 = sigma.data().iter().sum();
    if total == 0.0 {
        return Err(SubspaceError::DegenerateWeights);
    }
    let threshold = alpha * total;
    let mut partial = 0.0;
    for (i, &s) in sigma.data().iter().enumerate() {
        partial += s;
        if partial > threshold {
            return Ok(i + 1);
        }
    }
    Ok(sigma.data().iter().filter(|&&s| s > 0.0).count())
}

/// Decomposes `w` and keeps the top-m left singular vectors.
pub fn build_subspace(w: &Matrix, cfg: &SubspaceConfig) -> Result<Subspace, SubspaceError> {
    let factors = svd(w)?;
    subspace_from_factors(&factors, &weight_fingerprint(w), cfg)
}

/// Builds a subspace from an existing decomposition, so alpha sweeps pay for
/// the SVD once.
pub fn subspace_from_factors(
    factors: &SvdFactors,
    weight_fingerprint: &str,
    cfg: &SubspaceConfig,
) -> Result<Subspace, SubspaceError> {
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(SubspaceError::BadAlpha { alpha: cfg.alpha });
    }
    let k = factors.sigma.len();
    let m = match cfg.m_override {
        Some(m) => {
            if m < 1 || m > k {
                return Err(SubspaceError::BadOverride { m, k });
            }
            m
        }
        None => select_m(&factors.sigma, cfg.alpha)?,
    };
    let d = factors.u.rows();
    let mut data = Vec::with_capacity(d * m);
    for i in 0..d {
        for j in 0..m {
            data.push(factors.u.get(i, j));
        }
    }
    Ok(Subspace {
        u_m: Matrix::from_vec(d, m, data)?,
        m,
        alpha_used: cfg.alpha,
        sigma: factors.sigma.clone(),
        weight_fingerprint: weight_fingerprint.to_string(),
    })
}

/// Scale applied to a feature row before scoring: 1/‖row‖ under
/// normalization (zero rows pass through), 1 otherwise.
#[inline]
fn feature_scale(row: &[f64], normalize: bool) -> f64 {
    if normalize {
        let norm = slice_l2_norm(row);
        if norm > 0.0 {
            return 1.0 / norm;
        }
    }
    1.0
}

fn row_projection_norm(row: &[f64], u_m: &Matrix, scale: f64) -> f64 {
    let mut sum_sq = 0.0;
    for j in 0..u_m.cols() {
        let mut dot = 0.0;
        for (i, &zi) in row.iter().enumerate() {
            dot += zi * scale * u_m.get(i, j);
        }
        sum_sq += dot * dot;
    }
    sum_sq.sqrt()
}

fn check_dim(got: usize, expected: usize) -> Result<(), SubspaceError> {
    if got != expected {
        return Err(SubspaceError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Projection-norm score `S(x) = ‖ẑU_M‖₂`; higher means more
/// in-distribution. With normalization the score lies in [0, 1] up to
/// rounding.
pub fn clafr_score(z: &Vector, s: &Subspace, cfg: &SubspaceConfig) -> Result<f64, SubspaceError> {
    check_dim(z.len(), s.dim())?;
    let scale = feature_scale(z.data(), cfg.normalize_features);
    Ok(row_projection_norm(z.data(), &s.u_m, scale))
}

/// Reconstruction error `e(x) = −‖ẑU_MU_Mᵀ − ẑ‖₂` (Algorithm-equivalent dual
/// of the projection norm: e(x) = −√(‖ẑ‖² − S(x)²)). Always ≤ 0; zero only
/// for features already inside the subspace.
pub fn reconstruction_error(
    z: &Vector,
    s: &Subspace,
    cfg: &SubspaceConfig,
) -> Result<f64, SubspaceError> {
    check_dim(z.len(), s.dim())?;
    let scale = feature_scale(z.data(), cfg.normalize_features);
    let u_m = &s.u_m;
    let m = u_m.cols();
    let mut proj = vec![0.0; m];
    for (j, p) in proj.iter_mut().enumerate() {
        for (i, &zi) in z.data().iter().enumerate() {
            *p += zi * scale * u_m.get(i, j);
        }
    }
    let mut sum_sq = 0.0;
    for (i, &zi) in z.data().iter().enumerate() {
        let mut back = 0.0;
        for (j, &pj) in proj.iter().enumerate() {
            back += pj * u_m.get(i, j);
        }
        let r = back - zi * scale;
        sum_sq += r * r;
    }
    Ok(-sum_sq.sqrt())
}

/// Scores every row of `z`; output order matches input order and each value
/// equals the corresponding single [`clafr_score`] call bitwise.
pub fn score_batch(
    z: &Matrix,
    s: &Subspace,
    cfg: &SubspaceConfig,
) -> Result<ScoredBatch, SubspaceError> {
    if z.rows() > 0 {
        check_dim(z.cols(), s.dim())?;
    }
    let mut scores = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let row = z.row(i);
        let scale = feature_scale(row, cfg.normalize_features);
        scores.push(row_projection_norm(row, &s.u_m, scale));
    }
    Ok(ScoredBatch {
        scores: Vector::from_vec(scores)?,
        fingerprint: s.fingerprint(cfg.normalize_features),
        ns_per_sample: None,
    })
}
