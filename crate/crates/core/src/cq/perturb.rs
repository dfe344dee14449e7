//! The perturbation that makes a prescribed orthonormal block the unique
//! eigenbasis for the smallest eigenvalues.

use super::CqError;
use crate::linalg::dense::norm;
use crate::linalg::{Mat, SymMat};
use crate::model::NsdpProblem;

/// `Δ = M - G(x)` with `M = U diag(λ_1..λ_r, (r+1)t, ..., m t) U^T`,
/// `U = [P, E]`, `λ_i = p_i^T G(x) p_i` and `t = ||x - x̄||`.
///
/// The `m - r` smallest eigenvalues of `G(x) + Δ` are then `(r+1)t < ... < m t`
/// with eigenvectors the columns of `E`, provided they stay below the
/// `λ_i`.
pub fn separating_perturbation(
    problem: &dyn NsdpProblem,
    x: &[f64],
    xbar: &[f64],
    e: &Mat,
    p: &Mat,
    orth_tol: f64,
) -> Result<SymMat, CqError> {
    let m = problem.m();
    if e.rows() != m || p.rows() != m || e.cols() + p.cols() != m {
        return Err(CqError::Dimension(format!(
            "blocks of widths {} and {} do not span order {m}",
            p.cols(),
            e.cols()
        )));
    }
    let u = p.hcat(e);
    if u.orthonormality_error() > orth_tol {
        return Err(CqError::Invalid("[P, E] is not column-orthonormal".into()));
    }
    let t = norm(&x.iter().zip(xbar).map(|(a, b)| a - b).collect::<Vec<_>>());
    if t == 0.0 {
        return Err(CqError::Invalid("x equals x̄: the small eigenvalues would coincide".into()));
    }
    let g = problem.g(x);
    let r = p.cols();
    let mut weights = Vec::with_capacity(m);
    for i in 0..r {
        let pi = p.column(i);
        weights.push(g.bilinear(&pi, &pi));
    }
    for i in r..m {
        weights.push((i + 1) as f64 * t);
    }
    let target = SymMat::from_weighted_columns(&u, &weights);
    Ok(&target - &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_decompose;
    use crate::model::{MatrixPolyProblem, QuadForm};

    fn diag_opposite() -> MatrixPolyProblem {
        MatrixPolyProblem::new(
            QuadForm::linear(0.0, vec![1.0]),
            SymMat::zeros(2),
            vec![SymMat::from_diag(&[1.0, -1.0])],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn prescribed_small_eigenvalues() {
        let p = diag_opposite();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = Mat::from_rows(&[vec![s, -s], vec![s, s]]);
        let delta = separating_perturbation(&p, &[0.1], &[0.0], &e, &Mat::zeros(2, 0), 1e-10).unwrap();
        let d = spectral_decompose(&(&p.g(&[0.1]) + &delta)).unwrap();
        assert!((d.values[0] - 0.2).abs() < 1e-12);
        assert!((d.values[1] - 0.1).abs() < 1e-12);
        assert!(delta.frobenius() < 0.5);
    }

    #[test]
    fn rejects_base_point() {
        let p = diag_opposite();
        let err = separating_perturbation(&p, &[0.0], &[0.0], &Mat::identity(2), &Mat::zeros(2, 0), 1e-10);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_orthonormal_blocks() {
        let p = diag_opposite();
        let e = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(separating_perturbation(&p, &[0.1], &[0.0], &e, &Mat::zeros(2, 0), 1e-10).is_err());
    }
}
