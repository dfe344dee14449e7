//! Rank and dependence tests for small vector families.

use super::dense::{dot, norm, Mat};
use super::simplex;
use super::Tolerances;

/// Number of `values` strictly above `eps_rank * scale`.
///
/// `values` are expected in non-increasing order, as produced by the
/// eigensolver, but the count does not rely on it.
pub fn numerical_rank(values: &[f64], scale: f64, eps_rank: f64) -> usize {
    let cut = eps_rank * scale;
    values.iter().filter(|&&v| v > cut).count()
}

/// Singular values and right singular vectors of the matrix whose columns
/// are `vectors`, via one-sided (Hestenes) Jacobi.
///
/// Returns `(sigma, v)` with `sigma` sorted non-increasing and `v` holding
/// the matching right singular vectors as columns.
pub fn singular_values(vectors: &[Vec<f64>]) -> (Vec<f64>, Mat) {
    let p = vectors.len();
    let mut cols: Vec<Vec<f64>> = vectors.to_vec();
    let mut v = Mat::identity(p);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = (cols[i].clone(), cols[j].clone());
                for k in 0..ci.len() {
                    cols[i][k] = c * ci[k] - s * cj[k];
                    cols[j][k] = s * ci[k] + c * cj[k];
                }
                for k in 0..p {
                    let (vi, vj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vi - s * vj;
                    v[(k, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| sig[i]).collect();
    (sorted, v.select_columns(&order))
}

/// Numerical rank of a vector family: singular values above
/// `max(eps_rank * sigma_max, eps_rank * scale)`. An all-zero family has
/// rank zero.
pub fn family_rank(vectors: &[Vec<f64>], scale: f64, tol: &Tolerances) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let (sig, _) = singular_values(vectors);
    let smax = sig[0];
    if smax == 0.0 {
        return 0;
    }
    let cut = tol.rank * smax.max(scale);
    sig.iter().filter(|&&s| s > cut).count()
}

/// Linear dependence with singular values measured relative to the
/// family's own largest one.
pub fn lin_dependent(vectors: &[Vec<f64>], tol: &Tolerances) -> bool {
    lin_dependent_scaled(vectors, 0.0, tol)
}

/// As [`lin_dependent`], with the cutoff additionally floored at
/// `eps_rank * scale` so that vectors that are negligible against a
/// reference magnitude count as zero.
pub fn lin_dependent_scaled(vectors: &[Vec<f64>], scale: f64, tol: &Tolerances) -> bool {
    family_rank(vectors, scale, tol) < vectors.len()
}

/// A unit vector `w` with `sum_i w_i z_i` smallest, i.e. the right singular
/// vector for the smallest singular value.
pub fn null_combination(vectors: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let (sig, v) = singular_values(vectors);
    let last = vectors.len() - 1;
    (v.column(last), sig[last])
}

/// Positive linear dependence: is there `alpha >= 0`, `sum alpha = 1`,
/// with `sum alpha_i z_i = 0`?
///
/// Nonzero vectors are normalized first (dependence is invariant to
/// positive scaling). Vectors with norm at most `eps_rank * scale` count
/// as zero and make the family trivially dependent.
pub fn pos_lin_dependent_scaled(vectors: &[Vec<f64>], scale: f64, tol: &Tolerances) -> bool {
    if vectors.is_empty() {
        return false;
    }
    let floor = tol.rank * scale;
    let mut normalized = Vec::with_capacity(vectors.len());
    for z in vectors {
        let nz = norm(z);
        if nz == 0.0 || nz <= floor {
            return true;
        }
        normalized.push(z.iter().map(|v| v / nz).collect::<Vec<f64>>());
    }
    simplex::convex_zero_residual(&normalized) <= tol.pld
}

pub fn pos_lin_dependent(vectors: &[Vec<f64>], tol: &Tolerances) -> bool {
    pos_lin_dependent_scaled(vectors, 0.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn rank_counts() {
        assert_eq!(numerical_rank(&[3.0, 2e-12, 0.0], 3.0, 1e-7), 1);
        assert_eq!(numerical_rank(&[1.0, 1.0, 1.0], 1.0, 1e-7), 3);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1.0, 1e-7), 0);
    }

    #[test]
    fn linear_dependence_cases() {
        assert!(!lin_dependent(&[vec![1.0, 0.0], vec![0.0, 1.0]], &t()));
        assert!(lin_dependent(&[vec![2.0, 0.0], vec![2.0, 0.0]], &t()));
        assert!(lin_dependent(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &t()));
        assert!(lin_dependent(&[vec![0.0, 0.0]], &t()));
        // a single tiny vector is independent on its own scale but not
        // against a unit reference
        assert!(!lin_dependent(&[vec![1e-17]], &t()));
        assert!(lin_dependent_scaled(&[vec![1e-17]], 2.0, &t()));
    }

    #[test]
    fn positive_dependence_cases() {
        assert!(pos_lin_dependent(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &t()));
        assert!(!pos_lin_dependent(&[vec![2.0, 0.0], vec![2.0, 0.0]], &t()));
        assert!(pos_lin_dependent(&[vec![1.0], vec![-1.0]], &t()));
        assert!(!pos_lin_dependent(&[vec![1.0], vec![3.0]], &t()));
        assert!(pos_lin_dependent(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
            &t()
        ));
        assert!(!pos_lin_dependent(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, -1.0]],
            &t()
        ));
    }

    #[test]
    fn null_combination_annihilates() {
        let z = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let (w, s) = null_combination(&z);
        assert!(s < 1e-14);
        let combo: Vec<f64> = (0..2).map(|k| w[0] * z[0][k] + w[1] * z[1][k]).collect();
        assert!(norm(&combo) < 1e-14);
    }
}
