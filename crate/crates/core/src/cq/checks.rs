//! Nondegeneracy, Robinson's CQ and the weak/sequential constant-rank
//! conditions.

use super::curves::WitnessCurve;
use super::perturb::separating_perturbation;
use super::sampling::{
    align_columns, block_haar, candidate_bases, clusters, gaussian_vec, random_unit, sample_rng,
    subsets,
};
use super::vfamily::{diag_family_with, v_family_of_columns};
use super::witness::{Dependence, Witness, WitnessPoint, WitnessSource};
use super::{base_rank, CheckOptions, CqError, CqKind, CqStatus, CqVerdict};
use crate::kkt::dg_scale;
use crate::linalg::dense::norm;
use crate::linalg::{lin_dependent_scaled, spectral_decompose, EigBasis, Mat, SymMat, Tolerances};
use crate::model::{apply_dg, NsdpProblem};

/// Data at `x̄` shared by the checks.
struct BaseData {
    rank: usize,
    /// Basis of the eigenvectors for the `m - r` smallest eigenvalues.
    e0: Mat,
    /// `Ē0 Ē0^T`.
    proj: Mat,
    scale: f64,
    dg: Vec<SymMat>,
}

fn base_data(problem: &dyn NsdpProblem, xbar: &[f64], tol: &Tolerances) -> Result<BaseData, CqError> {
    let rank = base_rank(problem, xbar, tol)?;
    let d = spectral_decompose(&problem.g(xbar))?;
    let idx: Vec<usize> = (rank..problem.m()).collect();
    let e0 = d.vectors.select_columns(&idx);
    let proj = e0.matmul(&e0.transpose());
    Ok(BaseData {
        rank,
        e0,
        proj,
        scale: dg_scale(problem, xbar),
        dg: problem.dg(xbar),
    })
}

fn verdict(kind: CqKind, status: CqStatus, rank: usize, problem: &dyn NsdpProblem, xbar: &[f64], opts: &CheckOptions) -> CqVerdict {
    CqVerdict {
        condition: kind,
        status,
        rank,
        m: problem.m(),
        xbar: xbar.to_vec(),
        tolerances: opts.tol,
        budget: opts.budget,
        seed: opts.seed,
        witness: None,
        direction: None,
        msr: None,
        note: None,
    }
}

fn full_rank_verdict(kind: CqKind, problem: &dyn NsdpProblem, xbar: &[f64], opts: &CheckOptions) -> CqVerdict {
    let mut v = verdict(kind, CqStatus::CertifiedHolds, problem.m(), problem, xbar, opts);
    v.note = Some("G(x̄) is positive definite (r = m)".into());
    v
}

pub fn check_nondegeneracy(problem: &dyn NsdpProblem, xbar: &[f64], opts: &CheckOptions) -> Result<CqVerdict, CqError> {
    let base = base_data(problem, xbar, &opts.tol)?;
    if base.rank == problem.m() {
        return Ok(full_rank_verdict(CqKind::Nondegeneracy, problem, xbar, opts));
    }
    let family = v_family_of_columns(problem, xbar, &base.e0).all();
    let k = base.e0.cols();
    if lin_dependent_scaled(&family, base.scale, &opts.tol) {
        let mut v = verdict(CqKind::Nondegeneracy, CqStatus::Violated, base.rank, problem, xbar, opts);
        v.witness = Some(Witness {
            source: WitnessSource::BasePoint,
            xbar: xbar.to_vec(),
            subset: (0..k).collect(),
            test: Dependence::Linear,
            full_family: true,
            scale: base.scale,
            limit_basis: base.e0,
            limit_family: family,
            limit_dependent: true,
            points: vec![],
            limits_checked: 1,
        });
        Ok(v)
    } else {
        Ok(verdict(CqKind::Nondegeneracy, CqStatus::CertifiedHolds, base.rank, problem, xbar, opts))
    }
}

/// `λ_min(G + DG d)` and a supergradient.
fn lambda_min_and_grad(g: &SymMat, dg: &[SymMat], d: &[f64]) -> Result<(f64, Vec<f64>), CqError> {
    let m = g + &apply_dg(dg, d);
    let dec = spectral_decompose(&m)?;
    let last = dec.dim() - 1;
    let u = dec.vectors.column(last);
    Ok((dec.values[last], dg.iter().map(|di| di.bilinear(&u, &u)).collect()))
}

fn project_ball(d: &mut [f64]) {
    let nd = norm(d);
    if nd > 1.0 {
        d.iter_mut().for_each(|v| *v /= nd);
    }
}

/// Best `(value, d)` of subgradient ascent on `λ_min(G + DG d)`, `||d|| <= 1`.
fn robinson_certificate(
    g: &SymMat,
    dg: &[SymMat],
    opts: &CheckOptions,
) -> Result<(f64, Vec<f64>), CqError> {
    let n = dg.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for restart in 0..opts.budget.robinson_restarts.max(1) {
        let mut d = if restart == 0 {
            vec![0.0; n]
        } else {
            let mut rng = sample_rng(opts.seed, 1, restart as u64);
            random_unit(&mut rng, n)
        };
        for it in 1..=opts.budget.robinson_iterations {
            let (val, grad) = lambda_min_and_grad(g, dg, &d)?;
            if val > best.0 {
                best = (val, d.clone());
            }
            let ng = norm(&grad);
            if ng == 0.0 {
                break;
            }
            let step = 1.0 / (it as f64).sqrt();
            d.iter_mut().zip(&grad).for_each(|(di, gi)| *di += step * gi / ng);
            project_ball(&mut d);
        }
        let (val, _) = lambda_min_and_grad(g, dg, &d)?;
        if val > best.0 {
            best = (val, d.clone());
        }
    }
    Ok(best)
}

pub fn check_robinson(problem: &dyn NsdpProblem, xbar: &[f64], opts: &CheckOptions) -> Result<CqVerdict, CqError> {
    let base = base_data(problem, xbar, &opts.tol)?;
    let g = problem.g(xbar);
    let (value, d) = robinson_certificate(&g, &base.dg, opts)?;
    if value > opts.tol.rank {
        let rank = base.rank;
        let mut v = verdict(CqKind::Robinson, CqStatus::CertifiedHolds, rank, problem, xbar, opts);
        v.direction = Some(d);
        v.note = Some(format!("lambda_min(G + DG d) = {value:e}"));
        return Ok(v);
    }
    if base.rank == problem.m() {
        return Ok(full_rank_verdict(CqKind::Robinson, problem, xbar, opts));
    }
    let cands = candidate_bases(problem, xbar, &base.e0, opts.budget.n_q, opts.seed);
    let k = base.e0.cols();
    for (i, ebar) in cands.iter().enumerate() {
        let fam = diag_family_with(&base.dg, ebar);
        if Dependence::Positive.holds(&fam, base.scale, &opts.tol) {
            let mut v = verdict(CqKind::Robinson, CqStatus::Violated, base.rank, problem, xbar, opts);
            v.witness = Some(Witness {
                source: WitnessSource::BasePoint,
                xbar: xbar.to_vec(),
                subset: (0..k).collect(),
                test: Dependence::Positive,
                full_family: false,
                scale: base.scale,
                limit_basis: ebar.clone(),
                limit_family: fam,
                limit_dependent: true,
                points: vec![],
                limits_checked: i + 1,
            });
            return Ok(v);
        }
    }
    let mut v = verdict(CqKind::Robinson, CqStatus::NoViolationFound, base.rank, problem, xbar, opts);
    v.note = Some(format!("best lambda_min(G + DG d) = {value:e}; {} limit bases sampled", cands.len()));
    Ok(v)
}

/// One level of a sequence.
struct Level {
    t: f64,
    x: Vec<f64>,
    delta: Option<SymMat>,
    basis: Mat,
    tail: Vec<f64>,
    dg: Vec<SymMat>,
}

/// Evaluates a curve on every shrink level, aligning each basis with the
/// previous one.
fn curve_levels(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    curve: &WitnessCurve,
    base: &BaseData,
    opts: &CheckOptions,
) -> Result<Vec<Level>, CqError> {
    let m = problem.m();
    let mut prev = base.e0.clone();
    let mut out = Vec::with_capacity(opts.budget.levels);
    for s in 0..opts.budget.levels {
        let t = opts.budget.level_t(s);
        let pt = curve.point(xbar, t);
        let mut g = problem.g(&pt.x);
        if let Some(delta) = &pt.delta {
            g = &g + delta;
        }
        let dec = spectral_decompose(&g)?;
        let tail_idx: Vec<usize> = (base.rank..m).collect();
        let (basis, tail) = match pt.basis {
            Some(b) => {
                let eb = EigBasis {
                    cols: b.clone(),
                    source_rank: base.rank,
                };
                let fro = g.frobenius();
                if !eb.check_against(&g, opts.tol.orth_for(m), opts.tol.recon_for(fro)) {
                    return Err(CqError::Invalid(format!(
                        "curve {} basis is not an eigenbasis at t = {t:e}",
                        curve.label()
                    )));
                }
                let tail = b.columns().iter().map(|c| g.bilinear(c, c)).collect();
                (b, tail)
            }
            None => {
                let raw = dec.vectors.select_columns(&tail_idx);
                let (aligned, perm) = align_columns(&raw, &prev);
                let tail = perm.iter().map(|&j| dec.values[base.rank + j]).collect();
                (aligned, tail)
            }
        };
        prev = basis.clone();
        out.push(Level {
            t,
            dg: problem.dg(&pt.x),
            x: pt.x,
            delta: pt.delta,
            basis,
            tail,
        });
    }
    Ok(out)
}

/// Limit basis from the two deepest levels: `orth(Ē0 Ē0^T (2 E_L - E_{L-1}))`.
fn extrapolated_limit(levels: &[Level], proj: &Mat) -> Mat {
    let l = levels.len();
    let last = &levels[l - 1].basis;
    if l >= 2 {
        let ext = last.scale(2.0).axpy(-1.0, &levels[l - 2].basis);
        if let Some(e) = proj.matmul(&ext).orthonormalized(1e-6) {
            return e;
        }
    }
    proj.matmul(last).orthonormalized(1e-6).unwrap_or_else(|| last.clone())
}

/// First subset `J` whose limit family is dependent under `test` while the
/// family stays linearly independent on every deep level.
fn violating_subset(
    limit_dg: &[SymMat],
    ebar: &Mat,
    deep: &[(&[SymMat], Mat)],
    test: Dependence,
    scale: f64,
    tol: &Tolerances,
) -> Option<Vec<usize>> {
    subsets(ebar.cols()).into_iter().find(|j| {
        let lim = diag_family_with(limit_dg, &ebar.select_columns(j));
        test.holds(&lim, scale, tol)
            && deep.iter().all(|(dg, e)| {
                let fam = diag_family_with(dg, &e.select_columns(j));
                !lin_dependent_scaled(&fam, scale, tol)
            })
    })
}

fn sequence_witness(
    source: WitnessSource,
    xbar: &[f64],
    subset: Vec<usize>,
    test: Dependence,
    base: &BaseData,
    ebar: &Mat,
    deep: Vec<(f64, Vec<f64>, Option<SymMat>, &[SymMat], Mat)>,
    tol: &Tolerances,
    limits_checked: usize,
) -> Witness {
    let limit_family = diag_family_with(&base.dg, &ebar.select_columns(&subset));
    let limit_dependent = test.holds(&limit_family, base.scale, tol);
    let points = deep
        .into_iter()
        .map(|(t, x, delta, dg, basis)| {
            let family = diag_family_with(dg, &basis.select_columns(&subset));
            let independent = !lin_dependent_scaled(&family, base.scale, tol);
            WitnessPoint {
                t,
                x,
                delta,
                basis,
                family,
                independent,
            }
        })
        .collect();
    Witness {
        source,
        xbar: xbar.to_vec(),
        subset,
        test,
        full_family: false,
        scale: base.scale,
        limit_basis: ebar.clone(),
        limit_family,
        limit_dependent,
        points,
        limits_checked,
    }
}

/// Ray directions: registered ones, then `±` coordinates, then random.
fn ray_dictionary(n: usize, curves: &[WitnessCurve], opts: &CheckOptions) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = curves
        .iter()
        .filter_map(|c| match c {
            WitnessCurve::Ray { direction } => Some(direction.clone()),
            _ => None,
        })
        .collect();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            out.push(d);
        }
    }
    for j in 0..opts.budget.directions {
        let mut rng = sample_rng(opts.seed, 20, j as u64);
        out.push(random_unit(&mut rng, n));
    }
    out
}

/// Weak-nondegeneracy, weak-Robinson, weak-CRCQ and weak-CPLD by sampling
/// rays `x̄ + t_k d`.
///
/// For each ray every sampled limit basis (the aligned eigenbasis and, when
/// the deepest level has clustered eigenvalues, block rotations of it) is
/// tested. The ray is a violation only if all of them fail.
pub fn check_weak_cq(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    kind: CqKind,
    opts: &CheckOptions,
) -> Result<CqVerdict, CqError> {
    let test = match kind {
        CqKind::WeakNondegeneracy | CqKind::WeakCrcq => Dependence::Linear,
        CqKind::WeakRobinson | CqKind::WeakCpld => Dependence::Positive,
        _ => return Err(CqError::Invalid(format!("{kind} is not a weak condition"))),
    };
    opts.budget.validate()?;
    let base = base_data(problem, xbar, &opts.tol)?;
    if base.rank == problem.m() {
        return Ok(full_rank_verdict(kind, problem, xbar, opts));
    }
    for c in &opts.curves {
        c.validate(problem.n(), problem.m())?;
    }
    let n = problem.n();
    let k = base.e0.cols();
    let stable = opts.budget.stable_levels;
    let whole = matches!(kind, CqKind::WeakNondegeneracy | CqKind::WeakRobinson);
    for (di, d) in ray_dictionary(n, &opts.curves, opts).into_iter().enumerate() {
        let ray = WitnessCurve::Ray { direction: d.clone() };
        let levels = curve_levels(problem, xbar, &ray, &base, opts)?;
        let ebar = extrapolated_limit(&levels, &base.proj);
        let last = levels.last().expect("at least eight levels");
        let ctol = 1e-12 * (1.0 + last.tail.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let blocks = clusters(&last.tail, ctol);
        let mut qs = vec![Mat::identity(k)];
        if blocks.iter().any(|b| b.len() > 1) {
            for j in 0..opts.budget.n_q {
                let mut rng = sample_rng(opts.seed, 21, ((di as u64) << 20) | j as u64);
                qs.push(block_haar(&mut rng, &blocks, k));
            }
        }
        let deep_levels = &levels[levels.len() - stable..];
        let mut first_failure: Option<(Mat, Vec<usize>, Vec<Mat>)> = None;
        let mut all_fail = true;
        for q in &qs {
            let eq = ebar.matmul(q);
            let deep_bases: Vec<Mat> = deep_levels.iter().map(|l| l.basis.matmul(q)).collect();
            let failing = if whole {
                let fam = diag_family_with(&base.dg, &eq);
                test.holds(&fam, base.scale, &opts.tol).then(|| (0..k).collect())
            } else {
                let deep: Vec<(&[SymMat], Mat)> = deep_levels
                    .iter()
                    .zip(&deep_bases)
                    .map(|(l, b)| (l.dg.as_slice(), b.clone()))
                    .collect();
                violating_subset(&base.dg, &eq, &deep, test, base.scale, &opts.tol)
            };
            match failing {
                Some(j) => {
                    if first_failure.is_none() {
                        first_failure = Some((eq, j, deep_bases));
                    }
                }
                None => {
                    all_fail = false;
                    break;
                }
            }
        }
        if all_fail {
            let (eq, j, deep_bases) = first_failure.expect("at least one candidate");
            let deep = if whole {
                vec![]
            } else {
                deep_levels
                    .iter()
                    .zip(deep_bases)
                    .map(|(l, b)| (l.t, l.x.clone(), None, l.dg.as_slice(), b))
                    .collect()
            };
            let w = sequence_witness(
                WitnessSource::Ray { direction: d },
                xbar,
                j,
                test,
                &base,
                &eq,
                deep,
                &opts.tol,
                qs.len(),
            );
            let mut v = verdict(kind, CqStatus::Violated, base.rank, problem, xbar, opts);
            v.witness = Some(w);
            return Ok(v);
        }
    }
    Ok(verdict(kind, CqStatus::NoViolationFound, base.rank, problem, xbar, opts))
}

/// Seq-CRCQ and seq-CPLD through the neighborhood characterization: for
/// limit bases `Ē` and subsets `J` dependent at `(x̄, Ē)`, look for nearby
/// `(x, E)` with `E` orthogonal to the top eigenvectors of `G(x)` where the
/// family is independent. Registered curves are tried first.
pub fn check_seq_cq(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    kind: CqKind,
    opts: &CheckOptions,
) -> Result<CqVerdict, CqError> {
    let test = match kind {
        CqKind::SeqCrcq => Dependence::Linear,
        CqKind::SeqCpld => Dependence::Positive,
        _ => return Err(CqError::Invalid(format!("{kind} is not a sequential condition"))),
    };
    opts.budget.validate()?;
    let base = base_data(problem, xbar, &opts.tol)?;
    let m = problem.m();
    if base.rank == m {
        return Ok(full_rank_verdict(kind, problem, xbar, opts));
    }
    let n = problem.n();
    let k = base.e0.cols();
    let stable = opts.budget.stable_levels;
    let levels_total = opts.budget.levels;

    for c in &opts.curves {
        c.validate(n, m)?;
        let levels = curve_levels(problem, xbar, c, &base, opts)?;
        let ebar = c.limit_basis().unwrap_or_else(|| extrapolated_limit(&levels, &base.proj));
        let deep_levels = &levels[levels.len() - stable..];
        let deep: Vec<(&[SymMat], Mat)> = deep_levels.iter().map(|l| (l.dg.as_slice(), l.basis.clone())).collect();
        if let Some(j) = violating_subset(&base.dg, &ebar, &deep, test, base.scale, &opts.tol) {
            let source = match c {
                WitnessCurve::Ray { direction } => WitnessSource::Ray {
                    direction: direction.clone(),
                },
                WitnessCurve::Named { name } => WitnessSource::Curve { name: name.clone() },
            };
            let pts = deep_levels
                .iter()
                .map(|l| (l.t, l.x.clone(), l.delta.clone(), l.dg.as_slice(), l.basis.clone()))
                .collect();
            let mut v = verdict(kind, CqStatus::Violated, base.rank, problem, xbar, opts);
            v.witness = Some(sequence_witness(source, xbar, j, test, &base, &ebar, pts, &opts.tol, 1));
            return Ok(v);
        }
    }

    let cands = candidate_bases(problem, xbar, &base.e0, opts.budget.n_q, opts.seed);
    let masks = subsets(k);
    for (ci, ebar) in cands.iter().enumerate() {
        for (ji, j) in masks.iter().enumerate() {
            let lim = diag_family_with(&base.dg, &ebar.select_columns(j));
            if !test.holds(&lim, base.scale, &opts.tol) {
                continue;
            }
            for draw in 0..opts.budget.neighborhood_draws as u64 {
                let mut rng = sample_rng(opts.seed, 30, ((ci as u64) << 32) | ((ji as u64) << 16) | draw);
                let d = if (draw as usize) < 2 * n {
                    let mut d = vec![0.0; n];
                    d[draw as usize / 2] = if draw % 2 == 0 { 1.0 } else { -1.0 };
                    d
                } else {
                    random_unit(&mut rng, n)
                };
                let w = Mat::from_columns(m, &(0..k).map(|_| gaussian_vec(&mut rng, m)).collect::<Vec<_>>());
                let mut pts = Vec::with_capacity(stable);
                let mut independent_everywhere = true;
                for s in levels_total - stable..levels_total {
                    let t = opts.budget.level_t(s);
                    let x: Vec<f64> = xbar.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                    let dec = spectral_decompose(&problem.g(&x))?;
                    let idx: Vec<usize> = (0..base.rank).collect();
                    let p = dec.vectors.select_columns(&idx);
                    let comp = Mat::identity(m).axpy(-1.0, &p.matmul(&p.transpose()));
                    let Some(e) = comp.matmul(&ebar.axpy(t, &w)).orthonormalized(1e-6) else {
                        independent_everywhere = false;
                        break;
                    };
                    let dg = problem.dg(&x);
                    let fam = diag_family_with(&dg, &e.select_columns(j));
                    if lin_dependent_scaled(&fam, base.scale, &opts.tol) {
                        independent_everywhere = false;
                        break;
                    }
                    let delta = separating_perturbation(problem, &x, xbar, &e, &p, opts.tol.orth_for(m))?;
                    pts.push((t, x, Some(delta), dg, e));
                }
                if independent_everywhere {
                    let pts = pts
                        .iter()
                        .map(|(t, x, delta, dg, e)| (*t, x.clone(), delta.clone(), dg.as_slice(), e.clone()))
                        .collect();
                    let mut v = verdict(kind, CqStatus::Violated, base.rank, problem, xbar, opts);
                    v.witness = Some(sequence_witness(
                        WitnessSource::Neighborhood { direction: d, draw },
                        xbar,
                        j.clone(),
                        test,
                        &base,
                        ebar,
                        pts,
                        &opts.tol,
                        ci + 1,
                    ));
                    return Ok(v);
                }
            }
        }
    }
    let mut v = verdict(kind, CqStatus::NoViolationFound, base.rank, problem, xbar, opts);
    v.note = Some(format!("{} limit bases sampled", cands.len()));
    Ok(v)
}
