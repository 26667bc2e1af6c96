//! Compressed sparse row matrices.

use std::io::{self, Write};

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::GridError;
use crate::Rational;

/// Row count above which mat-vecs run in parallel.
const PAR_ROWS: usize = 4096;

/// CSR matrix with sorted column indices and no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Stored entries and fill percentage `100 nnz / (rows cols)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SparsityReport {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    /// Exact percentage as `num/den`.
    pub percentage: String,
}

impl SparsityReport {
    pub fn percentage_exact(&self) -> Rational {
        Rational::new(
            BigInt::from(self.nnz) * 100,
            BigInt::from(self.rows) * BigInt::from(self.cols),
        )
    }

    pub fn percentage_f64(&self) -> f64 {
        100.0 * self.nnz as f64 / (self.rows as f64 * self.cols as f64)
    }
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Duplicate
    /// columns are summed and zero results dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, GridError> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let n_rows = rows.len();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                if c >= cols {
                    return Err(GridError::ShapeMismatch {
                        expected: cols,
                        found: c + 1,
                    });
                }
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            rows: n_rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.values[k] * x[self.col_idx[k]];
        }
        acc
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, GridError> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x` into a caller-provided buffer.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), GridError> {
        if x.len() != self.cols {
            return Err(GridError::ShapeMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        if y.len() != self.rows {
            return Err(GridError::ShapeMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        if self.rows >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
        Ok(())
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix, GridError> {
        if self.cols != other.rows {
            return Err(GridError::ShapeMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..self.rows)
            .into_par_iter()
            .map(|i| {
                let mut acc = Vec::new();
                for (k, a) in self.row(i) {
                    for (j, b) in other.row(k) {
                        acc.push((j, a * b));
                    }
                }
                acc
            })
            .collect();
        CsrMatrix::from_rows(other.cols, rows)
    }

    /// `diag * I + scale * self` for a square matrix.
    pub fn shifted(&self, diag: f64, scale: f64) -> Result<CsrMatrix, GridError> {
        if self.rows != self.cols {
            return Err(GridError::ShapeMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let rows = (0..self.rows)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, scale * v)).collect();
                r.push((i, diag));
                r
            })
            .collect();
        CsrMatrix::from_rows(self.cols, rows)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if max == 0.0 {
            0.0
        } else {
            worst / max
        }
    }

    pub fn sparsity(&self) -> SparsityReport {
        let mut r = SparsityReport {
            rows: self.rows,
            cols: self.cols,
            nnz: self.nnz(),
            percentage: String::new(),
        };
        r.percentage = r.percentage_exact().to_string();
        r
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::ratio;

    fn small() -> CsrMatrix {
        CsrMatrix::from_rows(
            3,
            vec![
                vec![(2, 1.0), (0, 2.0), (2, 1.0)],
                vec![(1, 3.0), (0, 0.0)],
                vec![(0, -1.0), (2, 1.0), (2, -1.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn construction_merges_and_drops_zeros() {
        let m = small();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.col_idx(), &[0, 2, 1, 0]);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert!(CsrMatrix::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
    }

    #[test]
    fn apply_and_identity() {
        let m = small();
        assert_eq!(m.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![8.0, 6.0, -1.0]);
        let x = vec![0.5, -1.0, 4.0];
        assert_eq!(CsrMatrix::identity(3).apply(&x).unwrap(), x);
        assert!(m.apply(&[1.0]).is_err());
    }

    #[test]
    fn product_and_shift() {
        let m = small();
        let p = m.matmul(&CsrMatrix::identity(3)).unwrap();
        assert_eq!(p, m);
        let sq = m.matmul(&m).unwrap();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(
            sq.apply(&x).unwrap(),
            m.apply(&m.apply(&x).unwrap()).unwrap()
        );
        let s = m.shifted(1.0, 2.0).unwrap();
        assert_eq!(s.get(0, 0), 5.0);
        assert_eq!(s.get(2, 2), 1.0);
    }

    #[test]
    fn sparsity_and_export() {
        let r = CsrMatrix::identity(4).sparsity();
        assert_eq!(r.percentage_exact(), ratio(25, 1));
        assert_eq!(r.percentage, "25");
        let mut buf = Vec::new();
        small().write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 2e0\n"));
    }
}
