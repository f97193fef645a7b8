//! Just enough dense linear algebra for the ridge solver.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        out.data
            .par_chunks_mut(other.cols)
            .enumerate()
            .for_each(|(r, out_row)| {
                for (k, &a) in self.row(r).iter().enumerate() {
                    if a != 0.0 {
                        for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                            *o += a * b;
                        }
                    }
                }
            });
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        self.transpose().matmul(other)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += value;
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let tol = max_diag * n as f64 * f64::EPSILON;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > tol) {
                return Err(Error::SingularSystem);
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let lj = &head[j * n..j * n + j];
            tail.par_chunks_mut(n).enumerate().for_each(|(off, row)| {
                let i = j + 1 + off;
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= row[k] * lj[k];
                }
                row[j] = s / d;
            });
        }
        Ok(Self { n, l })
    }

    /// Solve `A X = B` for every column of `B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.n;
        assert_eq!(b.rows, n);
        let bt = b.transpose();
        let mut xt = Matrix::zeros(b.cols, n);
        xt.data
            .par_chunks_mut(n)
            .zip(bt.data.par_chunks(n))
            .for_each(|(x, rhs)| {
                // forward: L y = b
                for i in 0..n {
                    let mut s = rhs[i];
                    for k in 0..i {
                        s -= self.l[i * n + k] * x[k];
                    }
                    x[i] = s / self.l[i * n + i];
                }
                // backward: Lᵀ x = y
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for k in i + 1..n {
                        s -= self.l[k * n + i] * x[k];
                    }
                    x[i] = s / self.l[i * n + i];
                }
            });
        xt.transpose()
    }
}
