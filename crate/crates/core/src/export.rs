//! Plain-text dense matrix format: a `rows cols` header line followed by one
//! line per row of space-separated values. Values use the shortest decimal
//! form that reads back to the same `f64`.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sampler::SamplingMatrix;

pub fn write_dense(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_dense(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension '{t}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be 'rows cols', got '{header}'")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(Error::Parse(format!("more than {rows} rows")));
        }
        let before = data.len();
        for t in line.split_whitespace() {
            data.push(
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value '{t}' in row {i}")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: data.len() - before,
            });
        }
    }
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: data.len() / cols.max(1),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Which original row feeds each segment of each extended row, one
/// `row,sequence` line per extended row (0-based row index into the full
/// matrix, 1-based sources).
pub fn sequence_provenance(matrix: &SamplingMatrix) -> String {
    let mut out = String::from("row,sequence\n");
    for (r, seq) in matrix.sequences.iter().enumerate() {
        let _ = writeln!(out, "{},\"{}\"", matrix.m_o() + r, seq);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, f64::MAX, 0.0, -2.5e17]);
        let text = write_dense(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(read_dense(&text).unwrap(), m);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(read_dense("2 2\n1 2\n3\n").is_err());
        assert!(read_dense("2 2\n1 2\n").is_err());
        assert!(read_dense("1 2 3\n").is_err());
        assert!(read_dense("").is_err());
    }
}
