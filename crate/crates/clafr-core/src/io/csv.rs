//! Headerless numeric CSV reader, the hand-editable fallback for fixtures.
//! Comma delimiter, `.` decimal separator, rectangular.

use std::path::Path;

use super::IoError;
use crate::tensor::Matrix;

pub fn read_csv_matrix(path: &Path) -> Result<Matrix, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut data = Vec::new();
    let mut n_cols: Option<usize> = None;
    let mut n_rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let expected = *n_cols.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(IoError::CsvRagged {
                path: path.to_path_buf(),
                row: idx + 1,
                expected,
                got: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let parsed = cell.trim().parse::<f64>().ok().filter(|x| x.is_finite());
            match parsed {
                Some(x) => data.push(x),
                None => {
                    return Err(IoError::CsvCell {
                        path: path.to_path_buf(),
                        row: idx + 1,
                        col: j + 1,
                        cell: cell.trim().to_string(),
                    })
                }
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(IoError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Matrix::from_vec(n_rows, n_cols.unwrap_or(0), data).map_err(|source| IoError::BadTensor {
        path: path.to_path_buf(),
        source,
    })
}
