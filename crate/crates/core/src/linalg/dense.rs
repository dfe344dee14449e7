use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Small dense row-major matrix used for eigenvector blocks and bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            m.set_column(j, col);
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Mat {
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| self.column(j)).collect();
        Mat::from_columns(self.rows, &cols)
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||A^T A - I||_F`
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().matmul(self);
        let mut acc = 0.0;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (g[(i, j)] - target).powi(2);
            }
        }
        acc.sqrt()
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut cols = self.columns();
        cols.extend(other.columns());
        Mat::from_columns(self.rows, &cols)
    }

    /// Orthonormalizes the columns in order with twice-iterated modified
    /// Gram-Schmidt. Returns `None` when a column collapses below `tol`
    /// relative to its original norm.
    pub fn orthonormalized(&self, tol: f64) -> Option<Mat> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.cols);
        for j in 0..self.cols {
            let mut c = self.column(j);
            let norm0 = norm(&c);
            if norm0 == 0.0 {
                return None;
            }
            for _ in 0..2 {
                for q in &out {
                    let p = dot(q, &c);
                    for (ci, qi) in c.iter_mut().zip(q) {
                        *ci -= p * qi;
                    }
                }
            }
            let nc = norm(&c);
            if nc <= tol * norm0 {
                return None;
            }
            c.iter_mut().for_each(|v| *v /= nc);
            out.push(c);
        }
        Some(Mat::from_columns(self.rows, &out))
    }

    /// Completes orthonormal columns to an orthonormal basis of `R^rows`
    /// by Gram-Schmidt against the standard basis.
    pub fn complete_basis(&self) -> Mat {
        let mut cols = self.columns();
        for e in 0..self.rows {
            if cols.len() == self.rows {
                break;
            }
            let mut c = vec![0.0; self.rows];
            c[e] = 1.0;
            for _ in 0..2 {
                for q in &cols {
                    let p = dot(q, &c);
                    for (ci, qi) in c.iter_mut().zip(q) {
                        *ci -= p * qi;
                    }
                }
            }
            let nc = norm(&c);
            if nc > 1e-8 {
                c.iter_mut().for_each(|v| *v /= nc);
                cols.push(c);
            }
        }
        Mat::from_columns(self.rows, &cols)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
