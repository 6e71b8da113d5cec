use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Dense,
    /// Only the diagonal is stored.
    Diagonal,
}

/// Real matrix stored row-major, or as a bare diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    kind: MatrixKind,
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl Matrix {
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            rows,
            cols,
            data,
            kind: MatrixKind::Dense,
        })
    }

    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        check_finite(&diag)?;
        let n = diag.len();
        Ok(Self {
            rows: n,
            cols: n,
            data: diag,
            kind: MatrixKind::Diagonal,
        })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::dense(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            kind: MatrixKind::Dense,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            data: vec![1.0; n],
            kind: MatrixKind::Diagonal,
        }
    }

    pub fn column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::dense(n, 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn is_diagonal(&self) -> bool {
        self.kind == MatrixKind::Diagonal
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Raw storage: the diagonal for diagonal matrices, row-major otherwise.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Diagonal entries (for either kind).
    pub fn diag(&self) -> Vec<f64> {
        match self.kind {
            MatrixKind::Diagonal => self.data.clone(),
            MatrixKind::Dense => (0..self.rows.min(self.cols))
                .map(|i| self.data[i * self.cols + i])
                .collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            MatrixKind::Diagonal => {
                if i == j {
                    self.data[i]
                } else {
                    0.0
                }
            }
            MatrixKind::Dense => self.data[i * self.cols + j],
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self.kind {
            MatrixKind::Dense => self.clone(),
            MatrixKind::Diagonal => {
                let n = self.rows;
                let mut data = vec![0.0; n * n];
                for (i, v) in self.data.iter().enumerate() {
                    data[i * n + i] = *v;
                }
                Matrix {
                    rows: n,
                    cols: n,
                    data,
                    kind: MatrixKind::Dense,
                }
            }
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn transpose(&self) -> Matrix {
        match self.kind {
            MatrixKind::Diagonal => self.clone(),
            MatrixKind::Dense => {
                let mut data = vec![0.0; self.data.len()];
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        data[j * self.rows + i] = self.data[i * self.cols + j];
                    }
                }
                Matrix {
                    rows: self.cols,
                    cols: self.rows,
                    data,
                    kind: MatrixKind::Dense,
                }
            }
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        match (self.kind, other.kind) {
            (MatrixKind::Diagonal, MatrixKind::Diagonal) => Ok(Matrix {
                data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
                ..self.clone()
            }),
            (MatrixKind::Diagonal, MatrixKind::Dense) => {
                let mut out = other.clone();
                for i in 0..out.rows {
                    let d = self.data[i];
                    for v in &mut out.data[i * out.cols..(i + 1) * out.cols] {
                        *v *= d;
                    }
                }
                Ok(out)
            }
            (MatrixKind::Dense, MatrixKind::Diagonal) => {
                let mut out = self.clone();
                for i in 0..out.rows {
                    for j in 0..out.cols {
                        out.data[i * out.cols + j] *= other.data[j];
                    }
                }
                Ok(out)
            }
            (MatrixKind::Dense, MatrixKind::Dense) => {
                let (n, m, p) = (self.rows, self.cols, other.cols);
                let mut data = vec![0.0; n * p];
                for i in 0..n {
                    for k in 0..m {
                        let a = self.data[i * m + k];
                        if a == 0.0 {
                            continue;
                        }
                        let row = &other.data[k * p..(k + 1) * p];
                        for (o, b) in data[i * p..(i + 1) * p].iter_mut().zip(row) {
                            *o += a * b;
                        }
                    }
                }
                Ok(Matrix {
                    rows: n,
                    cols: p,
                    data,
                    kind: MatrixKind::Dense,
                })
            }
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        if self.kind == other.kind {
            return Ok(Matrix {
                data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
                ..self.clone()
            });
        }
        let (a, b) = (self.to_dense(), other.to_dense());
        Ok(Matrix {
            data: a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect(),
            ..a
        })
    }

    /// y = M x. Returns the product and the number of multiply-adds spent.
    pub fn matvec(&self, x: &[f64]) -> Result<(Vec<f64>, u64)> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok(match self.kind {
            MatrixKind::Diagonal => (self.data.iter().zip(x).map(|(d, v)| d * v).collect(), self.rows as u64),
            MatrixKind::Dense => (
                self.data
                    .chunks_exact(self.cols)
                    .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect(),
                (self.rows * self.cols) as u64,
            ),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        match self.kind {
            MatrixKind::Diagonal => self.data.iter().fold(0.0, |m, v| m.max(v.abs())),
            MatrixKind::Dense => (0..self.cols)
                .map(|j| (0..self.rows).map(|i| self.data[i * self.cols + j].abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.is_diagonal() {
            return true;
        }
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let scale = self.max_abs().max(1.0);
        (0..n).all(|i| (i + 1..n).all(|j| (self.data[i * n + j] - self.data[j * n + i]).abs() <= tol * scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Matrix::diagonal(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Matrix::dense(1, 2, vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn diagonal_dense_product_matches_dense_path() {
        let d = Matrix::diagonal(vec![2.0, -1.0]).unwrap();
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let a = d.matmul(&m).unwrap();
        let b = d.to_dense().matmul(&m).unwrap();
        assert_eq!(a, b);
        let c = m.matmul(&d).unwrap();
        let e = m.matmul(&d.to_dense()).unwrap();
        assert_eq!(c, e);
    }

    #[test]
    fn matvec_counts_flops() {
        let d = Matrix::diagonal(vec![1.0; 16]).unwrap();
        assert_eq!(d.matvec(&[1.0; 16]).unwrap().1, 16);
        assert_eq!(d.to_dense().matvec(&[1.0; 16]).unwrap().1, 256);
    }
}
