//! Binary tensor container.
//!
//! Layout, fully little-endian and identical on every platform:
//!
//! ```text
//! offset 0   magic     4 bytes  "CTF1"
//! offset 4   dtype     1 byte   0 = f32, 1 = f64
//! offset 5   rank      1 byte   1 = vector, 2 = matrix
//! offset 6   dims      rank × u64
//! then       payload   row-major values, dtype-sized, little-endian
//! ```
//!
//! All values widen to `f64` on read; a write in f64 followed by a read is
//! the identity on dims and payload bits.

use std::path::Path;

use super::{write_bytes_atomic, IoError};
use crate::tensor::{Matrix, Vector};

pub const MAGIC: [u8; 4] = *b"CTF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// A rank-1 or rank-2 tensor as stored in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Vector(Vector),
    Matrix(Matrix),
}

impl Tensor {
    pub fn rank(&self) -> u8 {
        match self {
            Tensor::Vector(_) => 1,
            Tensor::Matrix(_) => 2,
        }
    }

    fn dims(&self) -> Vec<u64> {
        match self {
            Tensor::Vector(v) => vec![v.len() as u64],
            Tensor::Matrix(m) => vec![m.rows() as u64, m.cols() as u64],
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            Tensor::Vector(v) => v.data(),
            Tensor::Matrix(m) => m.data(),
        }
    }
}

impl From<Matrix> for Tensor {
    fn from(m: Matrix) -> Self {
        Tensor::Matrix(m)
    }
}

impl From<Vector> for Tensor {
    fn from(v: Vector) -> Self {
        Tensor::Vector(v)
    }
}

fn take<'a>(
    bytes: &'a [u8],
    offset: &mut usize,
    n: usize,
    path: &Path,
) -> Result<&'a [u8], IoError> {
    let remaining = bytes.len() - *offset;
    if remaining < n {
        return Err(IoError::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len(),
            needed: n - remaining,
        });
    }
    let slice = &bytes[*offset..*offset + n];
    *offset += n;
    Ok(slice)
}

/// Reads a tensor file, widening f32 payloads to f64.
pub fn read_tensor(path: &Path) -> Result<Tensor, IoError> {
    let bytes = std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut offset = 0usize;

    let magic = take(&bytes, &mut offset, 4, path)?;
    if magic != MAGIC {
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
            got: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let dtype_code = take(&bytes, &mut offset, 1, path)?[0];
    let dtype = Dtype::from_code(dtype_code).ok_or(IoError::BadDtype {
        path: path.to_path_buf(),
        dtype: dtype_code,
    })?;
    let rank = take(&bytes, &mut offset, 1, path)?[0];
    if rank != 1 && rank != 2 {
        return Err(IoError::BadRank {
            path: path.to_path_buf(),
            rank,
        });
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let raw = take(&bytes, &mut offset, 8, path)?;
        dims.push(u64::from_le_bytes(raw.try_into().expect("8-byte slice")));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(IoError::EmptyDims {
            path: path.to_path_buf(),
            dims,
        });
    }
    let elems = dims
        .iter()
        .try_fold(1usize, |acc, &d| {
            usize::try_from(d).ok().and_then(|d| acc.checked_mul(d))
        })
        .and_then(|e| e.checked_mul(dtype.size()).map(|_| e))
        .ok_or_else(|| IoError::TooLarge {
            path: path.to_path_buf(),
            dims: dims.clone(),
        })?;
    let payload = take(&bytes, &mut offset, elems * dtype.size(), path)?;
    if offset != bytes.len() {
        return Err(IoError::TrailingBytes {
            path: path.to_path_buf(),
            offset,
            extra: bytes.len() - offset,
        });
    }

    let data: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect(),
    };
    let bad_tensor = |source| IoError::BadTensor {
        path: path.to_path_buf(),
        source,
    };
    match rank {
        1 => Ok(Tensor::Vector(Vector::from_vec(data).map_err(bad_tensor)?)),
        _ => Ok(Tensor::Matrix(
            Matrix::from_vec(dims[0] as usize, dims[1] as usize, data).map_err(bad_tensor)?,
        )),
    }
}

/// Reads a tensor file that must be rank 2.
pub fn read_matrix(path: &Path) -> Result<Matrix, IoError> {
    match read_tensor(path)? {
        Tensor::Matrix(m) => Ok(m),
        t => Err(IoError::RankMismatch {
            path: path.to_path_buf(),
            expected: 2,
            got: t.rank(),
        }),
    }
}

/// Reads a tensor file that must be rank 1.
pub fn read_vector(path: &Path) -> Result<Vector, IoError> {
    match read_tensor(path)? {
        Tensor::Vector(v) => Ok(v),
        t => Err(IoError::RankMismatch {
            path: path.to_path_buf(),
            expected: 1,
            got: t.rank(),
        }),
    }
}

/// Writes a tensor atomically. Tensors with a zero dimension are rejected:
/// the format carries data, not shapes.
pub fn write_tensor(path: &Path, tensor: &Tensor, dtype: Dtype) -> Result<(), IoError> {
    let dims = tensor.dims();
    if dims.iter().any(|&d| d == 0) {
        return Err(IoError::EmptyDims {
            path: path.to_path_buf(),
            dims,
        });
    }
    let data = tensor.data();
    let mut bytes = Vec::with_capacity(6 + 8 * dims.len() + data.len() * dtype.size());
    bytes.extend_from_slice(&MAGIC);
    bytes.push(dtype.code());
    bytes.push(tensor.rank());
    for &d in &dims {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    match dtype {
        Dtype::F64 => {
            for &x in data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for &x in data {
                bytes.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
    }
    write_bytes_atomic(path, &bytes)
}
