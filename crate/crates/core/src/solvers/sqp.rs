//! SQP with a linearized semidefinite subproblem solved by the augmented
//! Lagrangian method.

use serde::{Deserialize, Serialize};

use super::al::{solve_augmented_lagrangian_from, AlConfig};
use super::trace::{IterRecord, SolverTrace, StepInfo, Termination};
use super::SolverError;
use crate::kkt::{kkt_residual, TraceRecord};
use crate::linalg::dense::{dot, norm};
use crate::linalg::{proj_psd, SymMat};
use crate::model::{apply_dg, lagrangian_grad, MatrixPolyProblem, NsdpProblem, QuadForm};

/// Choice of the positive definite model Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HessianPolicy {
    /// Powell-damped BFGS updates of the Lagrangian Hessian, reset to the
    /// identity when the Frobenius norm exceeds `cap`.
    DampedBfgs { cap: f64 },
    /// Fixed `λ I`.
    Scaled { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpConfig {
    pub armijo_sigma: f64,
    pub max_halvings: usize,
    pub hessian: HessianPolicy,
    /// Configuration of the subproblem solver.
    pub subproblem: AlConfig,
    pub subproblem_max_outer: usize,
    /// Subproblem target as a fraction of the outer target.
    pub subproblem_tol_ratio: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        SqpConfig {
            armijo_sigma: 1e-4,
            max_halvings: 50,
            hessian: HessianPolicy::DampedBfgs { cap: 1e6 },
            subproblem: AlConfig::default(),
            subproblem_max_outer: 60,
            subproblem_tol_ratio: 1e-2,
        }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, v)).collect()
}

fn damped_bfgs(h: &mut Vec<Vec<f64>>, s: &[f64], y: &[f64], cap: f64) {
    let hs = mat_vec(h, s);
    let shs = dot(s, &hs);
    if shs <= 0.0 || !shs.is_finite() {
        return;
    }
    let sy = dot(s, y);
    let theta = if sy >= 0.2 * shs { 1.0 } else { 0.8 * shs / (shs - sy) };
    let r: Vec<f64> = y.iter().zip(&hs).map(|(yi, hi)| theta * yi + (1.0 - theta) * hi).collect();
    let sr = dot(s, &r);
    if sr <= 0.0 {
        return;
    }
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -hs[i] * hs[j] / shs + r[i] * r[j] / sr;
        }
    }
    // keep exact symmetry
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = avg;
            h[j][i] = avg;
        }
    }
    let fro: f64 = h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if fro > cap || !fro.is_finite() {
        *h = identity(n);
    }
}

/// Solves `min 1/2 d^T H d + ∇f^T d  s.t.  G(x) + DG(x) d ⪰ 0`.
///
/// Returns the step, the multiplier, the subproblem's constraint
/// perturbation `V` (so that `G(x) + DG(x) d + V ⪰ 0` holds exactly), the
/// subproblem residual and whether the subproblem converged.
fn linearized_step(
    g: &SymMat,
    dg: &[SymMat],
    grad_f: &[f64],
    h: &[Vec<f64>],
    y_start: &SymMat,
    cfg: &SqpConfig,
    tol: f64,
) -> Result<(Vec<f64>, SymMat, SymMat, f64, bool), SolverError> {
    let n = grad_f.len();
    let sub = MatrixPolyProblem::new(
        QuadForm {
            c0: 0.0,
            lin: grad_f.to_vec(),
            quad: h.to_vec(),
        },
        g.clone(),
        dg.to_vec(),
        vec![],
    )?;
    let trace = solve_augmented_lagrangian_from(
        &sub,
        &vec![0.0; n],
        y_start,
        &cfg.subproblem,
        tol,
        cfg.subproblem_max_outer,
    )?;
    let last = trace.last();
    Ok((
        last.akkt.x.clone(),
        last.akkt.y.clone(),
        last.akkt.delta_mat.clone(),
        last.residual.max(),
        trace.termination.converged(),
    ))
}

pub fn solve_sqp(
    problem: &dyn NsdpProblem,
    x0: &[f64],
    y0: &SymMat,
    cfg: &SqpConfig,
    target_tol: f64,
    max_iter: usize,
) -> Result<SolverTrace, SolverError> {
    if x0.len() != problem.n() || y0.dim() != problem.m() {
        return Err(SolverError::InvalidConfig("start point or multiplier has wrong size".into()));
    }
    if !(cfg.armijo_sigma > 0.0 && cfg.armijo_sigma < 1.0) {
        return Err(SolverError::InvalidConfig("armijo_sigma must lie in (0, 1)".into()));
    }
    if max_iter == 0 {
        return Err(SolverError::InvalidConfig("max_iter must be positive".into()));
    }
    let n = problem.n();
    let mut h = match cfg.hessian {
        HessianPolicy::DampedBfgs { .. } => identity(n),
        HessianPolicy::Scaled { lambda } => {
            if !(lambda > 0.0) {
                return Err(SolverError::InvalidConfig("lambda must be positive".into()));
            }
            let mut h = identity(n);
            h.iter_mut().enumerate().for_each(|(i, r)| r[i] = lambda);
            h
        }
    };
    let mut x = x0.to_vec();
    let mut y = proj_psd(y0)?;
    let mut records = Vec::new();
    let sub_tol = cfg.subproblem_tol_ratio * target_tol;
    for k in 1..=max_iter {
        let g = problem.g(&x);
        let dg = problem.dg(&x);
        let grad_f = problem.grad_f(&x);
        let (d, y_next, v_sub, sub_res, sub_ok) =
            linearized_step(&g, &dg, &grad_f, &h, &y, cfg, sub_tol)?;
        let delta_mat = &apply_dg(&dg, &d) + &v_sub;
        let delta_vec = lagrangian_grad(problem, &x, &y_next)?;
        let residual = kkt_residual(problem, &x, &y_next)?;
        let d_norm = norm(&d);
        let mut rec = IterRecord {
            akkt: TraceRecord {
                k,
                x: x.clone(),
                y: y_next.clone(),
                delta_mat,
                delta_vec,
                rho: None,
            },
            ytilde: None,
            v_norm: Some(v_sub.frobenius()),
            rho_kept: None,
            eps: None,
            inner: None,
            step: Some(StepInfo {
                d_norm,
                alpha: 0.0,
                halvings: 0,
                subproblem_residual: sub_res,
            }),
            residual,
        };
        if !sub_ok {
            // the linearized constraint could not be satisfied: report the
            // remaining infeasibility of the best step found
            let lin = &g + &apply_dg(&dg, &d);
            let infeas = proj_psd(&-&lin)?.frobenius();
            if infeas > sub_tol.max(1e-8) {
                records.push(rec);
                return Ok(SolverTrace {
                    solver: "sqp".into(),
                    records,
                    termination: Termination::SubproblemInfeasible,
                });
            }
        }
        if d_norm <= target_tol {
            records.push(rec);
            return Ok(SolverTrace {
                solver: "sqp".into(),
                records,
                termination: Termination::StepBelowTolerance,
            });
        }
        let f0 = problem.f(&x);
        let slope = dot(&grad_f, &d);
        let mut alpha = 1.0;
        let mut halvings = 0;
        let mut accepted = None;
        while halvings <= cfg.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let ft = problem.f(&trial);
            if ft.is_finite() && ft - f0 <= cfg.armijo_sigma * alpha * slope {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
            halvings += 1;
        }
        if let Some(step) = rec.step.as_mut() {
            step.alpha = if accepted.is_some() { alpha } else { 0.0 };
            step.halvings = halvings.min(cfg.max_halvings);
        }
        records.push(rec);
        let Some(x_next) = accepted else {
            return Ok(SolverTrace {
                solver: "sqp".into(),
                records,
                termination: Termination::LineSearchFailed,
            });
        };
        if let HessianPolicy::DampedBfgs { cap } = cfg.hessian {
            let g_new = lagrangian_grad(problem, &x_next, &y_next)?;
            let g_old = lagrangian_grad(problem, &x, &y_next)?;
            let s: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            damped_bfgs(&mut h, &s, &yv, cap);
        }
        x = x_next;
        y = y_next;
    }
    Ok(SolverTrace {
        solver: "sqp".into(),
        records,
        termination: Termination::MaxOuter,
    })
}
