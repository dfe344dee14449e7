//! Reduction of a linear combination to a linearly independent sub-family
//! with coefficients of unchanged sign.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dense::norm;
use crate::linalg::rank::null_combination;
use crate::linalg::{lin_dependent, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombinationError {
    #[error("{vectors} vectors but {coeffs} coefficients")]
    LengthMismatch { vectors: usize, coeffs: usize },
    #[error("vectors have different lengths")]
    Ragged,
    #[error("non-finite entry")]
    NonFinite,
}

/// Null-vector entries below this fraction of the largest one are zero.
const NULL_ENTRY_CUTOFF: f64 = 1e-12;

/// `sum_i coeffs[i] * vectors[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicCombination {
    pub vectors: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

impl ConicCombination {
    pub fn new(vectors: Vec<Vec<f64>>, coeffs: Vec<f64>) -> Result<Self, CombinationError> {
        if vectors.len() != coeffs.len() {
            return Err(CombinationError::LengthMismatch {
                vectors: vectors.len(),
                coeffs: coeffs.len(),
            });
        }
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.len() != first.len()) {
                return Err(CombinationError::Ragged);
            }
        }
        let finite = vectors.iter().flatten().chain(&coeffs).all(|v| v.is_finite());
        if !finite {
            return Err(CombinationError::NonFinite);
        }
        Ok(ConicCombination { vectors, coeffs })
    }

    pub fn sum(&self) -> Vec<f64> {
        let n = self.vectors.first().map_or(0, Vec::len);
        combine(&self.vectors, &self.coeffs, n)
    }
}

fn combine(vectors: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for (v, a) in vectors.iter().zip(coeffs) {
        for (si, vi) in s.iter_mut().zip(v) {
            *si += a * vi;
        }
    }
    s
}

/// Output of [`reduce`]: indices into the original family and their new
/// coefficients, in increasing index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
}

/// Repeatedly moves the coefficients along a null vector of the active
/// family until one of them reaches zero, then drops it. Stops when the
/// remaining vectors are linearly independent.
pub fn reduce(comb: &ConicCombination, tol: &Tolerances) -> Reduction {
    let n = comb.vectors.first().map_or(0, Vec::len);
    let mut active: Vec<usize> = (0..comb.coeffs.len())
        .filter(|&i| comb.coeffs[i] != 0.0)
        .collect();
    let mut alpha: Vec<f64> = active.iter().map(|&i| comb.coeffs[i]).collect();

    loop {
        if active.is_empty() {
            break;
        }
        let family: Vec<Vec<f64>> = active.iter().map(|&i| comb.vectors[i].clone()).collect();
        if !lin_dependent(&family, tol) {
            break;
        }
        let (mut w, _) = null_combination(&family);
        // rounding noise in w would otherwise set a huge step t = a / w_k
        let cut = NULL_ENTRY_CUTOFF * w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        w.iter_mut().filter(|v| v.abs() <= cut).for_each(|v| *v = 0.0);
        // orient w so that some coefficient shrinks towards zero along alpha - t w
        if !alpha.iter().zip(&w).any(|(a, wi)| a * wi > 0.0) {
            w.iter_mut().for_each(|v| *v = -*v);
        }
        let mut hit: Option<(usize, f64)> = None;
        for (k, (&a, &wk)) in alpha.iter().zip(&w).enumerate() {
            if a * wk > 0.0 {
                let t = a / wk;
                if hit.is_none_or(|(_, best)| t < best) {
                    hit = Some((k, t));
                }
            }
        }
        let Some((k_hit, t)) = hit else {
            // w is numerically zero on every active coefficient; drop the
            // smallest-magnitude coefficient instead of looping forever
            let k = (0..alpha.len())
                .min_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()))
                .unwrap_or(0);
            active.remove(k);
            alpha.remove(k);
            continue;
        };
        for (a, wk) in alpha.iter_mut().zip(&w) {
            let next = *a - t * wk;
            // never cross zero: a coefficient that would change sign is the
            // result of rounding in t
            *a = if next * *a < 0.0 || next.abs() < tol.snap { 0.0 } else { next };
        }
        alpha[k_hit] = 0.0;
        let keep: Vec<bool> = alpha.iter().map(|&a| a != 0.0).collect();
        active = active.iter().zip(&keep).filter(|(_, &k)| k).map(|(&i, _)| i).collect();
        alpha = alpha.iter().zip(&keep).filter(|(_, &k)| k).map(|(&a, _)| a).collect();
    }

    let target = comb.sum();
    if !active.is_empty() {
        let family: Vec<Vec<f64>> = active.iter().map(|&i| comb.vectors[i].clone()).collect();
        if let Some(refit) = least_squares(&family, &target) {
            let same_sign = refit.iter().zip(&alpha).all(|(b, a)| a * b > 0.0);
            let old_err = norm(&sub(&combine(&family, &alpha, n), &target));
            let new_err = norm(&sub(&combine(&family, &refit, n), &target));
            if same_sign && new_err <= old_err {
                alpha = refit;
            }
        }
    }
    Reduction {
        indices: active,
        coeffs: alpha,
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least-squares coefficients of `target` on the columns `family`, via
/// modified Gram-Schmidt QR. `None` if a column collapses.
fn least_squares(family: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let p = family.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = vec![vec![0.0; p]; p];
    for (j, col) in family.iter().enumerate() {
        let mut v = col.clone();
        for (i, qi) in q.iter().enumerate() {
            let d: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            v.iter_mut().zip(qi).for_each(|(vk, qk)| *vk -= d * qk);
        }
        let nv = norm(&v);
        if nv == 0.0 || nv <= 1e-13 * norm(col) {
            return None;
        }
        r[j][j] = nv;
        q.push(v.iter().map(|x| x / nv).collect());
    }
    let rhs: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(target).map(|(a, b)| a * b).sum())
        .collect();
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r[i][j] * beta[j]).sum();
        beta[i] = (rhs[i] - s) / r[i][i];
    }
    Some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(comb: &ConicCombination, red: &Reduction) {
        let tol = Tolerances::default();
        let fam: Vec<Vec<f64>> = red.indices.iter().map(|&i| comb.vectors[i].clone()).collect();
        if !fam.is_empty() {
            assert!(!lin_dependent(&fam, &tol));
        }
        let n = comb.vectors[0].len();
        let s = comb.sum();
        let s2 = combine(&fam, &red.coeffs, n);
        assert!(norm(&sub(&s, &s2)) <= 1e-10 * (1.0 + norm(&s)));
        for (&i, &a) in red.indices.iter().zip(&red.coeffs) {
            assert!(comb.coeffs[i] * a > 0.0);
        }
    }

    #[test]
    fn near_zero_null_entry_is_not_a_pivot() {
        // the null vector of the active family has an entry at rounding level
        let comb = ConicCombination::new(
            vec![vec![1.0, 3.0], vec![-3.0, 1.0], vec![1.0, 0.0], vec![-1.0, 3.0], vec![1.0, -3.0], vec![2.0, -3.0]],
            vec![0.75, 1.0, 0.0, 0.25, 0.5, 0.25],
        )
        .unwrap();
        let red = reduce(&comb, &Tolerances::default());
        check(&comb, &red);
        assert_eq!(red.indices.len(), 2);
    }

    #[test]
    fn independent_family_is_unchanged() {
        let c = ConicCombination::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 2.0]).unwrap();
        let r = reduce(&c, &Tolerances::default());
        assert_eq!(r.indices, vec![0, 1]);
        assert_eq!(r.coeffs, vec![1.0, 2.0]);
    }

    #[test]
    fn three_vectors_in_the_plane() {
        let c = ConicCombination::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let r = reduce(&c, &Tolerances::default());
        check(&c, &r);
        assert!(r.indices.len() <= 2);
    }

    #[test]
    fn zero_coefficients_reduce_to_nothing() {
        let c = ConicCombination::new(vec![vec![1.0], vec![2.0]], vec![0.0, 0.0]).unwrap();
        let r = reduce(&c, &Tolerances::default());
        assert!(r.indices.is_empty());
    }

    #[test]
    fn mixed_signs_and_zero_vector() {
        let c = ConicCombination::new(
            vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![-2.0, -4.0], vec![0.0, 1.0]],
            vec![3.0, 1.0, -0.5, 2.0],
        )
        .unwrap();
        let r = reduce(&c, &Tolerances::default());
        check(&c, &r);
        assert!(!r.indices.contains(&1));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert!(ConicCombination::new(vec![vec![1.0]], vec![]).is_err());
    }
}
