use serde::{Deserialize, Serialize};

use super::dense::Mat;
use super::symmat::SymMat;
use super::LinalgError;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in non-increasing order with the matching orthonormal
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomp {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> SymMat {
        SymMat::from_weighted_columns(&self.vectors, &self.values)
    }

    /// `sum_i f(lambda_i) u_i u_i^T`
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let w: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        SymMat::from_weighted_columns(&self.vectors, &w)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// The sweep order is fixed (row-wise over the strict upper triangle), so
/// the output is a deterministic function of the input.
pub fn spectral_decompose(m: &SymMat) -> Result<SpectralDecomp, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.dim();
    let mut a = m.to_dense();
    let mut v = Mat::identity(n);

    let mut converged = n <= 1;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = off_diagonal_sq(&a);
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 {
            0.2 * off.sqrt() / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh || apq == 0.0 {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s, t);
            }
        }
    }
    if !converged {
        let off = off_diagonal_sq(&a);
        if off != 0.0 {
            return Err(LinalgError::NoConvergence {
                sweeps: MAX_SWEEPS,
                off_diagonal: off.sqrt(),
            });
        }
    }

    let values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| normalize_sign(v.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    // near-equal eigenvalues: order the eigenvectors lexicographically
    let scale = values.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    let tie = 8.0 * f64::EPSILON * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[order[end - 1]] - values[order[end]]).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&i, &j| lex_desc(&cols[i], &cols[j]));
        }
        start = end;
    }

    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let sorted_cols: Vec<Vec<f64>> = order.iter().map(|&i| std::mem::take(&mut cols[i])).collect();
    Ok(SpectralDecomp {
        values: sorted_values,
        vectors: Mat::from_columns(n, &sorted_cols),
    })
}

fn off_diagonal_sq(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut Mat, v: &mut Mat, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.rows();
    let tau = s / (1.0 + c);
    let apq = a[(p, q)];
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        a[(r, p)] = new_rp;
        a[(p, r)] = new_rp;
        a[(r, q)] = new_rq;
        a[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
}

/// Flips `u` so that its largest-magnitude entry (first one on ties) is
/// positive.
pub(crate) fn normalize_sign(mut u: Vec<f64>) -> Vec<f64> {
    let big = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(&lead) = u.iter().find(|x| x.abs() >= big * (1.0 - 1e-12)) {
        if lead < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
    u
}

fn lex_desc(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Orthogonal projection onto the PSD cone: eigenvalues clipped at zero.
pub fn proj_psd(m: &SymMat) -> Result<SymMat, LinalgError> {
    Ok(spectral_decompose(m)?.map_values(|l| l.max(0.0)))
}

/// Moreau decomposition `M = plus - minus` with `plus = proj(M)` and
/// `minus = proj(-M)`, which are mutually orthogonal.
pub fn moreau_split(m: &SymMat) -> Result<(SymMat, SymMat), LinalgError> {
    let d = spectral_decompose(m)?;
    Ok((d.map_values(|l| l.max(0.0)), d.map_values(|l| (-l).max(0.0))))
}

/// `m x (m - r)` matrix whose orthonormal columns are eigenvectors of the
/// source matrix for its `m - r` smallest eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigBasis {
    pub cols: Mat,
    pub source_rank: usize,
}

impl EigBasis {
    pub fn width(&self) -> usize {
        self.cols.cols()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.cols.column(i)
    }

    /// Checks `||E^T E - I||` and `||M E - E diag(lambda_{r+1..m})||`
    /// against the given tolerances.
    pub fn check_against(&self, m: &SymMat, eps_orth: f64, eps_recon: f64) -> bool {
        let Ok(d) = spectral_decompose(m) else {
            return false;
        };
        let tail = &d.values[self.source_rank..];
        let me = m.to_dense().matmul(&self.cols);
        let mut resid = 0.0;
        for j in 0..self.width() {
            for i in 0..m.dim() {
                resid += (me[(i, j)] - self.cols[(i, j)] * tail[j]).powi(2);
            }
        }
        self.cols.orthonormality_error() <= eps_orth && resid.sqrt() <= eps_recon
    }
}

/// Result of asking for the `m - r` smallest eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisOutcome {
    Basis(EigBasis),
    /// `r = m`: the set of such bases is empty.
    FullRank,
}

impl BasisOutcome {
    pub fn basis(self) -> Option<EigBasis> {
        match self {
            BasisOutcome::Basis(b) => Some(b),
            BasisOutcome::FullRank => None,
        }
    }
}

pub fn eig_basis_smallest(m: &SymMat, r: usize) -> Result<BasisOutcome, LinalgError> {
    let d = spectral_decompose(m)?;
    eig_basis_from_decomp(&d, r)
}

pub fn eig_basis_from_decomp(d: &SpectralDecomp, r: usize) -> Result<BasisOutcome, LinalgError> {
    let m = d.dim();
    if r > m {
        return Err(LinalgError::Dimension(format!("rank {r} exceeds order {m}")));
    }
    if r == m {
        return Ok(BasisOutcome::FullRank);
    }
    let idx: Vec<usize> = (r..m).collect();
    Ok(BasisOutcome::Basis(EigBasis {
        cols: d.vectors.select_columns(&idx),
        source_rank: r,
    }))
}

/// Top-`r` eigenvector block `P` (columns for the `r` largest eigenvalues).
pub fn top_block(d: &SpectralDecomp, r: usize) -> Mat {
    let idx: Vec<usize> = (0..r).collect();
    d.vectors.select_columns(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_input_is_exact() {
        let m = SymMat::from_diag(&[3.0, -2.0]);
        let d = spectral_decompose(&m).unwrap();
        assert_eq!(d.values, vec![3.0, -2.0]);
        assert_eq!(d.vectors, Mat::identity(2));
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[a, b], [b, a]] has eigenvalues a +- b
        let m = SymMat::from_rows(&[vec![-0.1, -0.09], vec![-0.09, -0.1]]).unwrap();
        let d = spectral_decompose(&m).unwrap();
        assert!(close(d.values[0], -0.01, 1e-15));
        assert!(close(d.values[1], -0.19, 1e-15));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = d.vectors.column(0);
        let u1 = d.vectors.column(1);
        assert!(close(u0[0].abs(), s, 1e-15) && close(u0[0], -u0[1], 1e-15));
        assert!(close(u1[0].abs(), s, 1e-15) && close(u1[0], u1[1], 1e-15));
    }

    #[test]
    fn projection_of_swap_matrix() {
        let m = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = proj_psd(&m).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!(close(p.get(i, j), 0.5, 1e-15));
        }
        let (plus, minus) = moreau_split(&m).unwrap();
        assert!(close(minus.get(0, 0), 0.5, 1e-15));
        assert!(close(minus.get(0, 1), -0.5, 1e-15));
        assert!(plus.inner(&minus).abs() < 1e-15);
    }

    #[test]
    fn full_rank_is_distinct_outcome() {
        let m = SymMat::identity(2);
        assert_eq!(eig_basis_smallest(&m, 2).unwrap(), BasisOutcome::FullRank);
        let b = eig_basis_smallest(&SymMat::from_diag(&[2.0, 0.0, 0.0]), 1)
            .unwrap()
            .basis()
            .unwrap();
        assert_eq!(b.cols.column(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(b.cols.column(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_matrix_basis_is_identity() {
        let b = eig_basis_smallest(&SymMat::zeros(2), 0).unwrap().basis().unwrap();
        assert_eq!(b.cols, Mat::identity(2));
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = SymMat::zeros(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(spectral_decompose(&m), Err(LinalgError::NonFinite)));
    }
}
