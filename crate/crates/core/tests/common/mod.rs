//! Independent oracles and randomized case checks shared by the property
//! suite and the acceptance gate.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nsdp::caratheodory::{reduce, ConicCombination};
use nsdp::linalg::{lin_dependent, moreau_split, pos_lin_dependent, proj_psd, spectral_decompose, SymMat, Tolerances};
use nsdp::model::{MatrixPolyProblem, NsdpProblem, QuadForm, QuadTerm};
use nsdp::solvers::{al_gradient, al_value};

pub type CaseResult = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn q(v: f64) -> BigRational {
    BigRational::from_f64(v).expect("finite")
}

/// Row echelon form over the rationals; returns the rank.
fn echelon(rows: &mut [Vec<BigRational>]) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let f = &rows[r][c] / &rows[rank][c];
                for k in c..cols {
                    let d = &f * &rows[rank][k];
                    rows[r][k] -= d;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Exact rank of a family of vectors with dyadic entries.
pub fn exact_rank(vectors: &[Vec<f64>]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = vectors.iter().map(|v| v.iter().map(|&x| q(x)).collect()).collect();
    echelon(&mut rows)
}

/// Exact null space of the columns `vectors` (as `Σ c_i v_i = 0`).
fn exact_null_space(vectors: &[&Vec<f64>]) -> Vec<Vec<BigRational>> {
    let k = vectors.len();
    let n = vectors[0].len();
    // rows of the n x k matrix whose columns are the vectors
    let mut rows: Vec<Vec<BigRational>> = (0..n).map(|i| vectors.iter().map(|v| q(v[i])).collect()).collect();
    echelon(&mut rows);
    let mut pivots = Vec::new();
    for row in &rows {
        if let Some(c) = row.iter().position(|x| !x.is_zero()) {
            pivots.push(c);
        }
    }
    let free: Vec<usize> = (0..k).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); k];
            v[f] = BigRational::from_integer(BigInt::from(1));
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -(&rows[r][f] / &rows[r][p]);
            }
            v
        })
        .collect()
}

/// Exact positive linear dependence: some subset has a one-dimensional
/// null space spanned by a strictly positive vector.
pub fn exact_pos_dependent(vectors: &[Vec<f64>]) -> bool {
    let k = vectors.len();
    for mask in 1u32..(1 << k) {
        let sub: Vec<&Vec<f64>> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| &vectors[i]).collect();
        let null = exact_null_space(&sub);
        if null.len() == 1 {
            let v = &null[0];
            if v.iter().all(|x| x.is_positive()) || v.iter().all(|x| x.is_negative()) {
                return true;
            }
        }
    }
    false
}

/// Small-integer vectors. In half of the draws the last one is a
/// combination of the others, with nonpositive or mixed-sign coefficients.
pub fn integer_family(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<Vec<f64>> {
    let mode = rng.random_range(0..4);
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect())
        .collect();
    if k >= 2 && mode >= 2 {
        let last: Vec<f64> = (0..n)
            .map(|j| {
                (0..k - 1)
                    .map(|i| {
                        let c = rng.random_range(0i32..=2) as f64;
                        let c = if mode == 2 { -c } else { c * if rng.random_bool(0.5) { 1.0 } else { -1.0 } };
                        c * v[i][j]
                    })
                    .sum()
            })
            .collect();
        v[k - 1] = last;
    }
    v
}

pub fn dependence_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let k = r.random_range(1..=5);
    let n = r.random_range(1..=4);
    let fam = integer_family(&mut r, k, n);
    let tol = Tolerances::default();
    let lin = lin_dependent(&fam, &tol);
    let lin_oracle = exact_rank(&fam) < k;
    if lin != lin_oracle {
        return Err(format!("lin_dependent {lin} vs exact {lin_oracle} on {fam:?}"));
    }
    let pos = pos_lin_dependent(&fam, &tol);
    let pos_oracle = exact_pos_dependent(&fam);
    if pos != pos_oracle {
        return Err(format!("pos_lin_dependent {pos} vs exact {pos_oracle} on {fam:?}"));
    }
    Ok(())
}

/// Exact coefficients of `target` in the family, if it is independent and
/// the target lies in its span.
fn exact_coefficients(family: &[Vec<f64>], target: &[BigRational]) -> Option<Vec<BigRational>> {
    let k = family.len();
    let n = target.len();
    let mut rows: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = family.iter().map(|v| q(v[i])).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let rank = echelon(&mut rows);
    let mut coeffs = vec![BigRational::zero(); k];
    for row in rows.iter().take(rank) {
        let p = row.iter().position(|x| !x.is_zero())?;
        if p == k {
            return None;
        }
        coeffs[p] = &row[k] / &row[p];
    }
    (exact_rank(family) == k).then_some(coeffs)
}

pub fn caratheodory_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let k = r.random_range(1..=6);
    let n = r.random_range(1..=3);
    let fam = integer_family(&mut r, k, n);
    let coeffs: Vec<f64> = (0..k).map(|_| r.random_range(0i32..=4) as f64 * 0.25).collect();
    let comb = ConicCombination::new(fam.clone(), coeffs.clone()).map_err(|e| e.to_string())?;
    let red = reduce(&comb, &Tolerances::default());
    let sub: Vec<Vec<f64>> = red.indices.iter().map(|&i| fam[i].clone()).collect();
    if !sub.is_empty() && exact_rank(&sub) != sub.len() {
        return Err(format!("reduced family {:?} is dependent", red.indices));
    }
    if red.indices.iter().any(|&i| coeffs[i] == 0.0) || red.coeffs.iter().any(|&c| c < 0.0) {
        return Err(format!("support or sign changed: {red:?}"));
    }
    let target: Vec<BigRational> = (0..n)
        .map(|j| (0..k).map(|i| q(coeffs[i]) * q(fam[i][j])).fold(BigRational::zero(), |a, b| a + b))
        .collect();
    if sub.is_empty() {
        return if target.iter().all(Zero::is_zero) {
            Ok(())
        } else {
            Err("empty reduction of a nonzero sum".into())
        };
    }
    // brute force: the reduced support must carry a nonnegative exact
    // representation, which the returned coefficients approximate
    let exact = exact_coefficients(&sub, &target).ok_or("sum outside the span of the reduced family")?;
    for (e, c) in exact.iter().zip(&red.coeffs) {
        if e.is_negative() {
            return Err(format!("exact coefficient {e} is negative"));
        }
        let ef: f64 = num_traits::ToPrimitive::to_f64(e).unwrap();
        if (ef - c).abs() > 1e-9 * (1.0 + ef.abs()) {
            return Err(format!("coefficient {c} vs exact {ef}"));
        }
    }
    Ok(())
}

pub fn random_sym(r: &mut ChaCha8Rng, m: usize, scale: f64) -> SymMat {
    let mut s = SymMat::zeros(m);
    for i in 0..m {
        for j in i..m {
            let v: f64 = r.sample(StandardNormal);
            s.set(i, j, scale * v);
        }
    }
    s
}

pub fn random_psd(r: &mut ChaCha8Rng, m: usize, scale: f64) -> SymMat {
    let b = random_sym(r, m, 1.0);
    let d = spectral_decompose(&b).unwrap();
    let rank = r.random_range(0..=m);
    let w: Vec<f64> = (0..m).map(|i| if i < rank { scale * r.random::<f64>() } else { 0.0 }).collect();
    SymMat::from_weighted_columns(&d.vectors, &w)
}

pub fn moreau_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let m = r.random_range(1..=6);
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let a = random_sym(&mut r, m, scale);
    let (p, n) = moreau_split(&a).map_err(|e| e.to_string())?;
    let tol = 1e-12 * (1.0 + a.frobenius());
    let recon = (&(&p - &n) - &a).frobenius();
    if recon > tol {
        return Err(format!("P - N differs from M by {recon:e}"));
    }
    let orth = p.inner(&n).abs();
    if orth > tol * (1.0 + a.frobenius()) {
        return Err(format!("<P, N> = {orth:e}"));
    }
    for (name, x) in [("P", &p), ("N", &n)] {
        let lmin = spectral_decompose(x).unwrap().min_value();
        if lmin < -tol {
            return Err(format!("{name} has eigenvalue {lmin:e}"));
        }
    }
    Ok(())
}

pub fn projection_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let m = r.random_range(1..=6);
    let scale = 10f64.powf(r.random_range(-2.0..2.0));
    let a = random_sym(&mut r, m, scale);
    let p = proj_psd(&a).map_err(|e| e.to_string())?;
    let resid = &a - &p;
    let best = resid.frobenius();
    let tol = 1e-10 * (1.0 + a.frobenius()).powi(2);
    for _ in 0..20 {
        let z = random_psd(&mut r, m, scale * 2.0);
        let d = (&a - &z).frobenius();
        if d < best - tol {
            return Err(format!("PSD point at distance {d:e} beats projection at {best:e}"));
        }
        // variational inequality <M - Π(M), Z - Π(M)> <= 0
        let vi = resid.inner(&(&z - &p));
        if vi > tol {
            return Err(format!("variational inequality violated by {vi:e}"));
        }
    }
    Ok(())
}

pub fn random_problem(r: &mut ChaCha8Rng) -> MatrixPolyProblem {
    let n = r.random_range(1..=4);
    let m = r.random_range(1..=4);
    let lin: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let mut quad = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = r.sample(StandardNormal);
            quad[i][j] = v;
            quad[j][i] = v;
        }
    }
    let mut b_quad = Vec::new();
    for i in 0..n {
        for j in i..n {
            if r.random_bool(0.5) {
                b_quad.push(QuadTerm {
                    i,
                    j,
                    matrix: random_sym(r, m, 1.0),
                });
            }
        }
    }
    MatrixPolyProblem::new(
        QuadForm { c0: 0.0, lin, quad },
        random_sym(r, m, 1.0),
        (0..n).map(|_| random_sym(r, m, 1.0)).collect(),
        b_quad,
    )
    .unwrap()
}

pub fn al_gradient_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let p = random_problem(&mut r);
    let n = p.n();
    let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let rho = 10f64.powf(r.random_range(-1.0..2.0));
    let yt = random_psd(&mut r, p.m(), 1.0);
    let g = al_gradient(&p, &x, rho, &yt);
    let h = 1e-6;
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (al_value(&p, &xp, rho, &yt) - al_value(&p, &xm, rho, &yt)) / (2.0 * h);
        let scale = 1.0 + fd.abs() + g[i].abs();
        if (fd - g[i]).abs() > 1e-5 * scale * (1.0 + rho) {
            return Err(format!("component {i}: analytic {} vs central difference {fd}", g[i]));
        }
    }
    Ok(())
}

/// Runs `cases` seeds and returns the failures.
pub fn run_cases(check: fn(u64) -> CaseResult, base: u64, cases: u64) -> Vec<(u64, String)> {
    (0..cases)
        .filter_map(|i| check(base + i).err().map(|e| (base + i, e)))
        .collect()
}
