use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::dense::Mat;
use super::LinalgError;

/// Dense real symmetric `m x m` matrix.
///
/// Only the upper triangle is stored (row-major), so entry `(i, j)` and
/// `(j, i)` are the same cell.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    dim: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i hold dim + (dim-1) + ... + (dim-i+1) cells
    i * (2 * dim - i + 1) / 2 + (j - i)
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a row-major upper triangle of length `dim (dim + 1) / 2`.
    pub fn from_upper(dim: usize, upper: Vec<f64>) -> Result<Self, LinalgError> {
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(LinalgError::Dimension(format!(
                "upper triangle of order {dim} needs {} entries, got {}",
                dim * (dim + 1) / 2,
                upper.len()
            )));
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(SymMat { dim, upper })
    }

    /// Builds from full rows, rejecting input that is not symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(LinalgError::Dimension(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                if a != b {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
                m.set(i, j, a);
            }
        }
        Ok(m)
    }

    /// Symmetric part `(A + A^T) / 2` of a square dense matrix.
    pub fn from_dense_sym_part(a: &Mat) -> Self {
        assert_eq!(a.rows(), a.cols(), "square matrix required");
        let dim = a.rows();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (a[(i, j)] + a[(j, i)]));
            }
        }
        m
    }

    /// `sum_i w_i c_i c_i^T` for the columns `c_i` of `cols`.
    pub fn from_weighted_columns(cols: &Mat, weights: &[f64]) -> Self {
        assert_eq!(cols.cols(), weights.len());
        let dim = cols.rows();
        let mut m = Self::zeros(dim);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..dim {
                let ci = cols[(i, k)] * w;
                if ci == 0.0 {
                    continue;
                }
                for j in i..dim {
                    let idx = packed_index(dim, i, j);
                    m.upper[idx] += ci * cols[(j, k)];
                }
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = packed_index(self.dim, i, j);
        self.upper[idx] = value;
    }

    /// Row-major upper triangle.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn to_dense(&self) -> Mat {
        let mut a = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                a[(i, j)] = self.get(i, j);
            }
        }
        a
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (i + 1..self.dim).all(|j| self.get(i, j) == 0.0))
    }

    /// Trace inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        assert_eq!(self.dim, other.dim, "inner product of mismatched orders");
        let mut diag = 0.0;
        let mut off = 0.0;
        for i in 0..self.dim {
            diag += self.get(i, i) * other.get(i, i);
            for j in i + 1..self.dim {
                off += self.get(i, j) * other.get(i, j);
            }
        }
        diag + 2.0 * off
    }

    pub fn frobenius(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &SymMat) -> SymMat {
        assert_eq!(self.dim, other.dim);
        SymMat {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// Quadratic form `u^T M w`.
    pub fn bilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            if u[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.get(i, j) * w[j];
            }
            acc += u[i] * row;
        }
        acc
    }

    /// `M v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Congruence `B^T M B` for a dense `m x k` matrix `B`.
    pub fn congruence(&self, b: &Mat) -> SymMat {
        assert_eq!(b.rows(), self.dim);
        let mb = self.to_dense().matmul(b);
        let k = b.cols();
        let mut out = SymMat::zeros(k);
        for i in 0..k {
            for j in i..k {
                let mut acc = 0.0;
                for r in 0..self.dim {
                    acc += b[(r, i)] * mb[(r, j)];
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymMat")
            .field("dim", &self.dim)
            .field("rows", &self.to_rows())
            .finish()
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        self.scale(rhs)
    }
}
