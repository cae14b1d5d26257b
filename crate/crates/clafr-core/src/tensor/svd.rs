//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! The target matrices are classifier weight blocks: tall-thin, at most a few
//! thousand columns. Cyclic one-sided Jacobi is dependency-free, simple to
//! make deterministic (fixed sweep order, fixed rotation formulas, explicit
//! tie-breaks), and accurate to near machine precision at these sizes.

use super::{slice_l2_norm, Matrix, TensorError, Vector};

/// Hard cap on Jacobi sweeps before reporting non-convergence.
const MAX_SWEEPS: usize = 100;

/// A column pair counts as orthogonal once its inner product is below this
/// tolerance relative to the product of the column norms. The normalized
/// criterion keeps small singular directions as accurate as dominant ones.
const PAIR_TOL: f64 = 1e-12;

/// Squared-norm ratio below which the smaller column of a pair is zeroed
/// outright (‖small‖ ≤ 1e-14·‖large‖). Exactly parallel columns leave a
/// rounding-level residue that stays fully correlated with its partner, so
/// the relative tolerance above can never fire; deflation perturbs the
/// input by at most 1e-14·σ_max, four orders under the reconstruction
/// contract.
const DEFLATE_RATIO: f64 = 1e-28;

/// The factors of `W = U · diag(sigma) · Vᵀ`.
///
/// `u` is D×k thin, `v` is C×k, and `sigma` holds the k = min(D, C) singular
/// values in descending order. Columns of `u` and `v` are orthonormal. The
/// sign of each singular-vector pair is arbitrary; consumers must compare
/// spans (projectors, norms), never raw entries.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vector,
    pub v: Matrix,
}

impl SvdFactors {
    /// `U · diag(sigma) · Vᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.u.rows();
        let c = self.v.rows();
        let k = self.sigma.len();
        let mut out = Matrix::zeros(d, c);
        for r in 0..k {
            let s = self.sigma.get(r);
            if s == 0.0 {
                continue;
            }
            for i in 0..d {
                let ui = self.u.get(i, r) * s;
                for j in 0..c {
                    out.set(i, j, out.get(i, j) + ui * self.v.get(j, r));
                }
            }
        }
        out
    }
}

/// Decomposes `w` into singular factors.
///
/// Deterministic for a fixed input: the sweep order, rotation arithmetic, and
/// final ordering (descending singular value, ties by original column index)
/// are all fixed. Fails with [`TensorError::SvdNonConvergence`] if the sweep
/// cap is exhausted.
pub fn svd(w: &Matrix) -> Result<SvdFactors, TensorError> {
    if w.rows() == 0 || w.cols() == 0 {
        return Err(TensorError::Empty {
            rows: w.rows(),
            cols: w.cols(),
        });
    }
    if w.rows() >= w.cols() {
        svd_tall(w)
    } else {
        // Wᵀ = U'ΣV'ᵀ gives W = V'ΣU'ᵀ, so the factors swap roles.
        let f = svd_tall(&w.transpose())?;
        Ok(SvdFactors {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
        })
    }
}

fn svd_tall(w: &Matrix) -> Result<SvdFactors, TensorError> {
    let d = w.rows();
    let k = w.cols();
    debug_assert!(d >= k);

    // Column-major working copies: `cols` is rotated toward mutual
    // orthogonality, `v_cols` accumulates the same rotations from identity.
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..d).map(|i| w.get(i, j)).collect())
        .collect();
    let mut v_cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k.saturating_sub(1) {
            for q in (p + 1)..k {
                let (app, aqq, apq) = pair_products(&cols[p], &cols[q]);
                if app == 0.0 || aqq == 0.0 {
                    // Numerically null column; replaced after convergence.
                    continue;
                }
                if aqq <= app * DEFLATE_RATIO {
                    cols[q].iter_mut().for_each(|x| *x = 0.0);
                    continue;
                }
                if app <= aqq * DEFLATE_RATIO {
                    cols[p].iter_mut().for_each(|x| *x = 0.0);
                    continue;
                }
                if apq.abs() <= PAIR_TOL * (app * aqq).sqrt() {
                    continue;
                }
                // Jacobi rotation zeroing the (p, q) entry of AᵀA.
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v_cols, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TensorError::SvdNonConvergence { sweeps: MAX_SWEEPS });
    }

    // Singular values are the rotated column norms; order them descending
    // with ties resolved by original column index.
    let sigma: Vec<f64> = cols.iter().map(|c| slice_l2_norm(c)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        sigma[b]
            .partial_cmp(&sigma[a])
            .expect("singular values are never NaN")
            .then(a.cmp(&b))
    });

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut null_slots: Vec<usize> = Vec::new();
    for &j in &order {
        if sigma[j] > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            null_slots.push(u_cols.len());
            u_cols.push(Vec::new());
        }
    }
    fill_null_columns(d, &mut u_cols, &null_slots);

    let u = matrix_from_cols(d, &u_cols)?;
    let ordered_v: Vec<Vec<f64>> = order.iter().map(|&j| v_cols[j].clone()).collect();
    let v = matrix_from_cols(k, &ordered_v)?;
    let sigma = Vector::from_vec(order.iter().map(|&j| sigma[j]).collect())?;
    Ok(SvdFactors { u, sigma, v })
}

/// One pass over a column pair: (‖p‖², ‖q‖², p·q).
fn pair_products(cp: &[f64], cq: &[f64]) -> (f64, f64, f64) {
    let mut app = 0.0;
    let mut aqq = 0.0;
    let mut apq = 0.0;
    for (x, y) in cp.iter().zip(cq) {
        app += x * x;
        aqq += y * y;
        apq += x * y;
    }
    (app, aqq, apq)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Replaces zero-norm columns with deterministic orthonormal directions:
/// each slot takes the standard basis vector with the largest residual
/// against the columns kept so far, orthogonalized (twice) and normalized.
fn fill_null_columns(d: usize, u_cols: &mut [Vec<f64>], null_slots: &[usize]) {
    if null_slots.is_empty() {
        return;
    }
    // row_mass[i] = Σ over kept columns of u[i]², so the residual of e_i
    // against the kept span has norm² = 1 − row_mass[i].
    let mut row_mass = vec![0.0; d];
    for col in u_cols.iter().filter(|c| !c.is_empty()) {
        for (m, x) in row_mass.iter_mut().zip(col) {
            *m += x * x;
        }
    }
    for &slot in null_slots {
        let mut best = 0;
        for i in 1..d {
            if row_mass[i] < row_mass[best] {
                best = i;
            }
        }
        let mut r = vec![0.0; d];
        r[best] = 1.0;
        for _ in 0..2 {
            for col in u_cols.iter().filter(|c| !c.is_empty()) {
                let dot: f64 = r.iter().zip(col).map(|(a, b)| a * b).sum();
                for (ri, ci) in r.iter_mut().zip(col) {
                    *ri -= dot * ci;
                }
            }
        }
        let norm = slice_l2_norm(&r);
        debug_assert!(norm > 0.0, "null-space completion ran out of directions");
        for x in &mut r {
            *x /= norm;
        }
        for (m, x) in row_mass.iter_mut().zip(&r) {
            *m += x * x;
        }
        u_cols[slot] = r;
    }
}

fn matrix_from_cols(rows: usize, cols: &[Vec<f64>]) -> Result<Matrix, TensorError> {
    let k = cols.len();
    let mut data = vec![0.0; rows * k];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * k + j] = x;
        }
    }
    Matrix::from_vec(rows, k, data)
}
