//! Independent oracles shared by the integration tests. Everything here is
//! deliberately naive — triple-loop products, exhaustive pairwise counts,
//! a two-sided Jacobi eigensolver — so agreement with the library is
//! evidence, not tautology.
#![allow(dead_code)]

use clafr_core::rng::Xoshiro256pp;
use clafr_core::{Matrix, Vector};

/// Triple-loop matrix product, no blocking, no skipping.
pub fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = vec![0.0; a.rows() * b.cols()];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for k in 0..a.cols() {
                acc += a.get(i, k) * b.get(k, j);
            }
            out[i * b.cols() + j] = acc;
        }
    }
    Matrix::from_vec(a.rows(), b.cols(), out).unwrap()
}

/// Gram matrix WᵀW via the triple loop.
pub fn gram_oracle(w: &Matrix) -> Vec<Vec<f64>> {
    let c = w.cols();
    let mut g = vec![vec![0.0; c]; c];
    for p in 0..c {
        for q in 0..c {
            let mut acc = 0.0;
            for i in 0..w.rows() {
                acc += w.get(i, p) * w.get(i, q);
            }
            g[p][q] = acc;
        }
    }
    g
}

/// Eigenvalues of a symmetric matrix by classical two-sided Jacobi,
/// descending. A different algorithm family from the library's one-sided
/// SVD, so it serves as an independent check on singular values.
pub fn symmetric_eigenvalues(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = g.to_vec();
    let frob = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= 1e-12 * frob.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| f64::total_cmp(y, x));
    eig
}

/// Exhaustive pairwise AUROC with integer win/tie counts. The final float
/// expression matches the library's, so agreement must be bitwise.
pub fn auroc_oracle(id: &[f64], ood: &[f64]) -> f64 {
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    for &s in id {
        for &o in ood {
            if s > o {
                wins += 1;
            } else if s == o {
                ties += 1;
            }
        }
    }
    let pairs = id.len() as f64 * ood.len() as f64;
    (wins as f64 + 0.5 * ties as f64) / pairs
}

/// Exhaustive operating-point scan: (tau, fpr, tpr_achieved) for the
/// smallest k with k/n ≥ target, thresholding at the k-th largest ID score.
pub fn fpr_oracle(id: &[f64], ood: &[f64], target: f64) -> (f64, f64, f64) {
    let n = id.len();
    let mut sorted = id.to_vec();
    sorted.sort_by(|a, b| f64::total_cmp(b, a));
    let mut k_star = n;
    for k in 1..=n {
        if (k as f64) / (n as f64) >= target {
            k_star = k;
            break;
        }
    }
    let tau = sorted[k_star - 1];
    let tpr = id.iter().filter(|&&s| s >= tau).count() as f64 / n as f64;
    let fpr = if ood.is_empty() {
        0.0
    } else {
        ood.iter().filter(|&&s| s >= tau).count() as f64 / ood.len() as f64
    };
    (tau, fpr, tpr)
}

/// One-pass scan for the smallest m whose leading σ mass strictly exceeds
/// alpha times the total, with the nonzero-count fallback.
pub fn select_m_oracle(sigma: &[f64], alpha: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    let threshold = alpha * total;
    let mut partial = 0.0;
    for (i, &s) in sigma.iter().enumerate() {
        partial += s;
        if partial > threshold {
            return i + 1;
        }
    }
    sigma.iter().filter(|&&s| s > 0.0).count()
}

/// Random matrix with standard-normal entries.
pub fn random_matrix(rng: &mut Xoshiro256pp, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.next_gaussian()).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Random n×n orthogonal matrix via Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut Xoshiro256pp, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        for prev in &cols {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        cols.push(v);
    }
    let mut data = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * n + j] = x;
        }
    }
    Matrix::from_vec(n, n, data).unwrap()
}

/// D×C matrix with orthonormal columns (D ≥ C), for planting spectra.
pub fn random_orthonormal_columns(rng: &mut Xoshiro256pp, d: usize, c: usize) -> Matrix {
    assert!(d >= c);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(c);
    while cols.len() < c {
        let mut v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        for prev in &cols {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        cols.push(v);
    }
    let mut data = vec![0.0; d * c];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * c + j] = x;
        }
    }
    Matrix::from_vec(d, c, data).unwrap()
}

/// W = U diag(sigma) Vᵀ with the given planted spectrum.
pub fn matrix_with_spectrum(rng: &mut Xoshiro256pp, d: usize, sigma: &[f64]) -> Matrix {
    let c = sigma.len();
    let u = random_orthonormal_columns(rng, d, c);
    let v = random_orthogonal(rng, c);
    let mut scaled = vec![0.0; d * c];
    for i in 0..d {
        for j in 0..c {
            scaled[i * c + j] = u.get(i, j) * sigma[j];
        }
    }
    let us = Matrix::from_vec(d, c, scaled).unwrap();
    matmul_oracle(&us, &v.transpose())
}

pub fn frob_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn projector(u: &Matrix) -> Matrix {
    matmul_oracle(u, &u.transpose())
}

pub fn vector(data: &[f64]) -> Vector {
    Vector::from_slice(data).unwrap()
}
