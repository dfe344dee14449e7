//! The vectors `v_ij(x, E)` with entries `e_i^T D_{x_l} G(x) e_j`.

use serde::{Deserialize, Serialize};

use crate::linalg::{EigBasis, Mat, SymMat};
use crate::model::{ModelError, NsdpProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VFamily {
    pub x: Vec<f64>,
    pub basis: Mat,
    /// `(i, j, v_ij)` for `i <= j`, in row-major order of the pairs.
    pub vectors: Vec<(usize, usize, Vec<f64>)>,
}

impl VFamily {
    pub fn get(&self, i: usize, j: usize) -> Option<&[f64]> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.vectors
            .iter()
            .find(|(a, b, _)| *a == i && *b == j)
            .map(|(_, _, v)| v.as_slice())
    }

    /// `v_ii` in column order.
    pub fn diagonal(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .filter(|(i, j, _)| i == j)
            .map(|(_, _, v)| v.clone())
            .collect()
    }

    /// All `v_ij` with `i <= j`.
    pub fn all(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|(_, _, v)| v.clone()).collect()
    }
}

fn v_entry(dg: &[SymMat], ei: &[f64], ej: &[f64]) -> Vec<f64> {
    dg.iter().map(|d| d.bilinear(ei, ej)).collect()
}

pub fn v_family(problem: &dyn NsdpProblem, x: &[f64], e: &EigBasis) -> Result<VFamily, ModelError> {
    if e.cols.rows() != problem.m() {
        return Err(ModelError::Dimension(format!(
            "basis has {} rows, constraint has order {}",
            e.cols.rows(),
            problem.m()
        )));
    }
    if x.len() != problem.n() {
        return Err(ModelError::Dimension(format!(
            "point has {} entries, problem has {} variables",
            x.len(),
            problem.n()
        )));
    }
    Ok(v_family_of_columns(problem, x, &e.cols))
}

/// Full family for an arbitrary column matrix (no orthonormality check).
pub fn v_family_of_columns(problem: &dyn NsdpProblem, x: &[f64], cols: &Mat) -> VFamily {
    let dg = problem.dg(x);
    let c = cols.columns();
    let mut vectors = Vec::new();
    for i in 0..c.len() {
        for j in i..c.len() {
            vectors.push((i, j, v_entry(&dg, &c[i], &c[j])));
        }
    }
    VFamily {
        x: x.to_vec(),
        basis: cols.clone(),
        vectors,
    }
}

/// `v_ii(x, E)` for every column of `cols`.
pub fn diag_family_of_columns(problem: &dyn NsdpProblem, x: &[f64], cols: &Mat) -> Vec<Vec<f64>> {
    let dg = problem.dg(x);
    cols.columns().iter().map(|e| v_entry(&dg, e, e)).collect()
}

/// Same as [`diag_family_of_columns`] with precomputed derivatives.
pub fn diag_family_with(dg: &[SymMat], cols: &Mat) -> Vec<Vec<f64>> {
    cols.columns().iter().map(|e| v_entry(dg, e, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixPolyProblem, QuadForm, QuadTerm};

    fn no_multiplier() -> MatrixPolyProblem {
        MatrixPolyProblem::new(
            QuadForm::linear(0.0, vec![-1.0]),
            SymMat::zeros(2),
            vec![SymMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap()],
            vec![QuadTerm {
                i: 0,
                j: 0,
                matrix: SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn identity_basis_family() {
        let p = no_multiplier();
        let f = v_family_of_columns(&p, &[0.3], &Mat::identity(2));
        assert_eq!(f.get(0, 0).unwrap(), &[1.0]);
        assert_eq!(f.get(1, 1).unwrap(), &[1.0]);
        assert!((f.get(1, 0).unwrap()[0] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn rotated_basis_family() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = Mat::from_rows(&[vec![-s, s], vec![s, s]]);
        let x = 0.25;
        let f = v_family_of_columns(&no_multiplier(), &[x], &e);
        assert!((f.get(0, 0).unwrap()[0] + 2.0 * x).abs() < 1e-14);
        assert!((f.get(1, 1).unwrap()[0] - 2.0 * (1.0 + x)).abs() < 1e-14);
        assert!(f.get(0, 1).unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn sign_flip_leaves_diagonal_unchanged() {
        let p = no_multiplier();
        let e = Mat::from_rows(&[vec![0.6, 0.8], vec![0.8, -0.6]]);
        let mut flipped = e.clone();
        flipped.set_column(1, &[-0.8, 0.6]);
        let a = diag_family_of_columns(&p, &[0.1], &e);
        let b = diag_family_of_columns(&p, &[0.1], &flipped);
        assert_eq!(a, b);
    }
}
