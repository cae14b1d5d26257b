//! File formats: a binary tensor container, a CSV fallback, run manifests,
//! and sidecar metadata.
//!
//! Every writer goes through temp-file-plus-rename, so a failed run never
//! leaves a partial artifact at the destination path. Every reader reports
//! failures with the offending path and, for binary files, the byte offset.

pub mod csv;
pub mod manifest;
pub mod meta;
pub mod tensor_file;

pub use csv::read_csv_matrix;
pub use manifest::{load_manifest, DatasetManifest};
pub use meta::{read_meta, write_meta};
pub use tensor_file::{read_matrix, read_tensor, read_vector, write_tensor, Dtype, Tensor};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: bad magic {got:?} at byte offset 0, expected \"CTF1\"", path.display())]
    BadMagic { path: PathBuf, got: [u8; 4] },
    #[error("{}: unsupported dtype {dtype} at byte offset 4", path.display())]
    BadDtype { path: PathBuf, dtype: u8 },
    #[error("{}: unsupported rank {rank} at byte offset 5, expected 1 or 2", path.display())]
    BadRank { path: PathBuf, rank: u8 },
    #[error("{}: tensor is rank {got}, expected rank {expected}", path.display())]
    RankMismatch { path: PathBuf, expected: u8, got: u8 },
    #[error("{}: zero dimension in {dims:?} at byte offset 6", path.display())]
    EmptyDims { path: PathBuf, dims: Vec<u64> },
    #[error("{}: dims {dims:?} exceed addressable size", path.display())]
    TooLarge { path: PathBuf, dims: Vec<u64> },
    #[error("{}: truncated at byte offset {offset}: need {needed} more bytes", path.display())]
    Truncated {
        path: PathBuf,
        offset: usize,
        needed: usize,
    },
    #[error("{}: {extra} trailing bytes after payload at byte offset {offset}", path.display())]
    TrailingBytes {
        path: PathBuf,
        offset: usize,
        extra: usize,
    },
    #[error("{}: row {row} has {got} columns, expected {expected}", path.display())]
    CsvRagged {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("{}: row {row}, column {col}: cannot parse {cell:?} as a finite number", path.display())]
    CsvCell {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("{}: file is empty", path.display())]
    EmptyFile { path: PathBuf },
    #[error("{}: line {line}: expected `key = value`", path.display())]
    BadLine { path: PathBuf, line: usize },
    #[error("{}: missing required key {key:?}", path.display())]
    MissingKey { path: PathBuf, key: &'static str },
    #[error("{}: duplicate key {key:?}", path.display())]
    DuplicateKey { path: PathBuf, key: String },
    #[error("{}: unknown key {key:?}", path.display())]
    UnknownKey { path: PathBuf, key: String },
    #[error("{}: key {key:?}: {reason}, got {value:?}", path.display())]
    BadValue {
        path: PathBuf,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    BadTensor {
        path: PathBuf,
        #[source]
        source: TensorError,
    },
}

/// Writes `bytes` to a sibling temp file, then renames over `path`.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = tmp_path(path);
    std::fs::write(&tmp, bytes).map_err(|source| IoError::Io {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, path).map_err(|source| {
        let _ = std::fs::remove_file(&tmp);
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), IoError> {
    write_bytes_atomic(path, text.as_bytes())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".tmp");
    path.with_file_name(name)
}

/// Parses `key = value` lines: `#` starts a comment, blank lines are
/// skipped, the first `=` splits key from value. Returns entries in file
/// order as (key, value, 1-based line number); keys may repeat.
pub(crate) fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String, usize)>, IoError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(IoError::BadLine {
            path: path.to_path_buf(),
            line: idx + 1,
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(IoError::BadLine {
                path: path.to_path_buf(),
                line: idx + 1,
            });
        }
        out.push((key.to_string(), value.to_string(), idx + 1));
    }
    Ok(out)
}
