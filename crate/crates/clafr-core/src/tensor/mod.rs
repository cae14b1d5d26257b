//! Dense linear-algebra layer: row-major matrices, vectors, norms, products,
//! and a self-contained SVD.
//!
//! Every constructor rejects non-finite entries, so a `Matrix` or `Vector`
//! obtained from this module is finite everywhere. All values are `f64`
//! internally; narrower inputs are widened at the I/O boundary.

mod svd;

pub use svd::{svd, SvdFactors};

use thiserror::Error;

/// Errors from tensor construction and operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {got} does not match {rows}x{cols}")]
    LengthMismatch { rows: usize, cols: usize, got: usize },
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("shape mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },
    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNonConvergence { sweeps: usize },
}

fn check_finite(data: &[f64]) -> Result<(), TensorError> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(TensorError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Dense row-major matrix of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::LengthMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested row slices (test and fixture convenience).
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, TensorError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(TensorError::LengthMismatch {
                    rows: n_rows,
                    cols: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row `i` as a slice (rows are contiguous in memory).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` copied into a `Vector`.
    pub fn col(&self, j: usize) -> Vector {
        let data = (0..self.rows).map(|i| self.get(i, j)).collect();
        Vector { data }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Standard matrix product. Fails on inner-dimension mismatch and, in
    /// keeping with the finiteness invariant, on overflow to infinity.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                let out_row = &mut out[i * other.cols..(i + 1) * other.cols];
                for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        Matrix::from_vec(self.rows, other.cols, out)
    }

    /// Scales every nonzero row to unit L2 norm; zero rows pass through
    /// unchanged so a zero feature keeps its (maximally out-of-distribution)
    /// zero score downstream.
    pub fn normalize_rows(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            let norm = slice_l2_norm(self.row(i));
            if norm > 0.0 {
                for j in 0..self.cols {
                    out.set(i, j, self.get(i, j) / norm);
                }
            }
        }
        out
    }

    /// `‖MᵀM − I‖_F`; zero exactly when the columns are orthonormal.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut sum_sq = 0.0;
        for p in 0..self.cols {
            for q in 0..self.cols {
                let mut dot = 0.0;
                for i in 0..self.rows {
                    dot += self.get(i, p) * self.get(i, q);
                }
                let target = if p == q { 1.0 } else { 0.0 };
                let d = dot - target;
                sum_sq += d * d;
            }
        }
        sum_sq.sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        slice_l2_norm(&self.data)
    }

    /// Matrix-vector product `M · v`.
    pub fn mul_vec(&self, v: &Vector) -> Result<Vector, TensorError> {
        if self.cols != v.len() {
            return Err(TensorError::ShapeMismatch {
                op: "mul_vec",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: v.len(),
                right_cols: 1,
            });
        }
        let data = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.data())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Vector::from_vec(data)
    }
}

/// Dense vector of `f64` values; all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn from_vec(data: Vec<f64>) -> Result<Self, TensorError> {
        check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self, TensorError> {
        Self::from_vec(data.to_vec())
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn l2_norm(&self) -> f64 {
        slice_l2_norm(&self.data)
    }

    /// Unit-norm copy; a zero vector is returned unchanged.
    pub fn normalized(&self) -> Vector {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return self.clone();
        }
        Vector {
            data: self.data.iter().map(|x| x / norm).collect(),
        }
    }

    pub fn dot(&self, other: &Vector) -> Result<f64, TensorError> {
        if self.len() != other.len() {
            return Err(TensorError::ShapeMismatch {
                op: "dot",
                left_rows: self.len(),
                left_cols: 1,
                right_rows: other.len(),
                right_cols: 1,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }
}

#[inline]
pub(crate) fn slice_l2_norm(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum::<f64>().sqrt()
}
