//! Random draws, basis alignment and the dictionary of candidate limit
//! bases shared by the sampling-based checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::dense::{dot, norm};
use crate::linalg::{spectral_decompose, Mat, SymMat};
use crate::model::NsdpProblem;

/// Independent generator for sample `index` of stream `stream`, so results
/// do not depend on evaluation order.
pub fn sample_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}

/// Haar-distributed orthogonal matrix: Gram-Schmidt of Gaussian columns.
pub fn haar_orthogonal(rng: &mut impl Rng, k: usize) -> Mat {
    loop {
        let cols: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(rng, k)).collect();
        if let Some(q) = Mat::from_columns(k, &cols).orthonormalized(1e-10) {
            return q;
        }
    }
}

/// Block-diagonal orthogonal matrix with a Haar block per cluster.
pub fn block_haar(rng: &mut impl Rng, blocks: &[Vec<usize>], k: usize) -> Mat {
    let mut q = Mat::identity(k);
    for b in blocks {
        if b.len() < 2 {
            continue;
        }
        let h = haar_orthogonal(rng, b.len());
        for (a, &i) in b.iter().enumerate() {
            for (c, &j) in b.iter().enumerate() {
                q[(i, j)] = h[(a, c)];
            }
        }
    }
    q
}

/// Groups indices whose values chain together within `tol`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for i in order {
        match (out.last_mut(), prev) {
            (Some(b), Some(p)) if (p - values[i]).abs() <= tol => b.push(i),
            _ => out.push(vec![i]),
        }
        prev = Some(values[i]);
    }
    for b in &mut out {
        b.sort_unstable();
    }
    out.sort();
    out
}

/// Reorders and re-signs the columns of `e` to best match `reference`
/// (greedy on absolute inner products). Column `i` of the result is
/// `±` column `perm[i]` of `e`.
pub fn align_columns(e: &Mat, reference: &Mat) -> (Mat, Vec<usize>) {
    let k = e.cols();
    let cols = e.columns();
    let refs = reference.columns();
    let mut used = vec![false; k];
    let mut out = vec![Vec::new(); k];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for (i, r) in refs.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            pairs.push((dot(r, c).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut filled = vec![false; k];
    let mut perm = vec![0; k];
    for (_, i, j) in pairs {
        if filled[i] || used[j] {
            continue;
        }
        let s = if dot(&refs[i], &cols[j]) < 0.0 { -1.0 } else { 1.0 };
        out[i] = cols[j].iter().map(|v| s * v).collect();
        filled[i] = true;
        used[j] = true;
        perm[i] = j;
    }
    (Mat::from_columns(e.rows(), &out), perm)
}

/// Orthonormal basis for the columns of `a` projected by `proj`, or `None`
/// if the projection loses rank.
pub fn project_orthonormal(a: &Mat, proj: &Mat) -> Option<Mat> {
    proj.matmul(a).orthonormalized(1e-6)
}

/// All nonempty subsets of `0..k` in order of increasing bitmask.
pub fn subsets(k: usize) -> Vec<Vec<usize>> {
    (1u32..(1u32 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// `Ē0^T D_l G(x̄) Ē0` for every variable.
pub fn compressed_derivatives(problem: &dyn NsdpProblem, xbar: &[f64], e0: &Mat) -> Vec<SymMat> {
    problem.dg(xbar).iter().map(|d| d.congruence(e0)).collect()
}

/// Basis of the orthogonal complement of `span{C_l}` in the symmetric
/// matrices of order `k`.
fn complement_basis(cs: &[SymMat], k: usize) -> Vec<SymMat> {
    // orthonormalize the C_l under the trace inner product
    let mut span: Vec<SymMat> = Vec::new();
    for c in cs {
        let mut v = c.clone();
        for s in &span {
            v = v.axpy(-v.inner(s), s);
        }
        let nv = v.frobenius();
        if nv > 1e-10 * (1.0 + c.frobenius()) {
            span.push(v.scale(1.0 / nv));
        }
    }
    let mut out: Vec<SymMat> = Vec::new();
    let mut all = span.clone();
    for i in 0..k {
        for j in i..k {
            let mut v = SymMat::zeros(k);
            v.set(i, j, if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 });
            for s in &all {
                v = v.axpy(-v.inner(s), s);
            }
            let nv = v.frobenius();
            if nv > 1e-8 {
                let v = v.scale(1.0 / nv);
                all.push(v.clone());
                out.push(v);
            }
        }
    }
    out
}

/// Searches a PSD matrix of unit trace in the complement by alternating
/// projections. `None` if the iteration does not settle.
fn psd_in_complement(start: &SymMat, basis: &[SymMat]) -> Option<SymMat> {
    let k = start.dim();
    let mut s = start.clone();
    for _ in 0..300 {
        // project onto the subspace
        let mut p = SymMat::zeros(k);
        for b in basis {
            p = p.axpy(s.inner(b), b);
        }
        // then onto the cone, normalized to unit trace
        let d = spectral_decompose(&p).ok()?;
        let plus = d.map_values(|v| v.max(0.0));
        let tr: f64 = plus.diag().iter().sum();
        if tr <= 1e-12 {
            return None;
        }
        let next = plus.scale(1.0 / tr);
        let moved = (&next - &s).frobenius();
        s = next;
        if moved < 1e-13 {
            break;
        }
    }
    let mut resid = SymMat::zeros(k);
    for b in basis {
        resid = resid.axpy(s.inner(b), b);
    }
    if (&resid - &s).frobenius() < 1e-9 {
        Some(resid)
    } else {
        None
    }
}

fn eig_basis_of(s: &SymMat) -> Option<Mat> {
    spectral_decompose(s).ok().map(|d| d.vectors)
}

/// Candidate limit bases `Ē0 Q`.
///
/// The dictionary holds `Ē0` itself, the eigenbases of the compressed
/// derivatives and of their random combinations, the eigenbases of matrices
/// orthogonal to every compressed derivative (such a matrix `S = Q diag(β) Q^T`
/// is exactly a vanishing combination `sum β_i v_ii(x̄, Ē0 Q)`), PSD ones
/// among them, and `n_q` Haar rotations.
pub fn candidate_bases(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    e0: &Mat,
    n_q: usize,
    seed: u64,
) -> Vec<Mat> {
    let k = e0.cols();
    let cs = compressed_derivatives(problem, xbar, e0);
    let mut qs: Vec<Mat> = vec![Mat::identity(k)];
    for c in &cs {
        qs.extend(eig_basis_of(c));
    }
    let comp = complement_basis(&cs, k);
    for s in &comp {
        qs.extend(eig_basis_of(s));
    }
    for idx in 0..8u64 {
        let mut rng = sample_rng(seed, 11, idx);
        if !cs.is_empty() {
            let w = gaussian_vec(&mut rng, cs.len());
            let mut c = SymMat::zeros(k);
            for (wi, ci) in w.iter().zip(&cs) {
                c = c.axpy(*wi, ci);
            }
            qs.extend(eig_basis_of(&c));
        }
        if !comp.is_empty() {
            let w = gaussian_vec(&mut rng, comp.len());
            let mut s = SymMat::zeros(k);
            for (wi, bi) in w.iter().zip(&comp) {
                s = s.axpy(*wi, bi);
            }
            qs.extend(eig_basis_of(&s));
            if let Some(p) = psd_in_complement(&s, &comp) {
                qs.extend(eig_basis_of(&p));
            }
        }
    }
    if !comp.is_empty() {
        let start = SymMat::identity(k).scale(1.0 / k as f64);
        if let Some(p) = psd_in_complement(&start, &comp) {
            qs.extend(eig_basis_of(&p));
        }
    }
    for idx in 0..n_q as u64 {
        let mut rng = sample_rng(seed, 12, idx);
        qs.push(haar_orthogonal(&mut rng, k));
    }
    qs.iter().map(|q| e0.matmul(q)).collect()
}
