//! Safeguarded augmented Lagrangian and external penalty methods.
//!
//! Both run the same outer step: approximately minimize
//! `L(x) = f(x) + ρ/2 ||Π(-G(x) + Ỹ/ρ)||² - ||Ỹ||²/(2ρ)`,
//! then read off `Y = ρ Π(-G(x) + Ỹ/ρ)` and `V = Π(-G(x) + Ỹ/ρ) - Ỹ/ρ`.
//! The penalty method is the case `Ỹ = 0` with a prescribed `ρ` schedule.

use serde::{Deserialize, Serialize};

use super::inner::{inner_minimize, InnerConfig, InnerStats};
use super::trace::{IterRecord, SolverTrace, Termination};
use super::SolverError;
use crate::kkt::{kkt_residual, TraceRecord};
use crate::linalg::dense::norm;
use crate::linalg::{proj_psd, SymMat};
use crate::model::{adjoint_dg, lagrangian_grad, NsdpProblem};

/// How the next safeguarded multiplier is chosen from `Y^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeguardPolicy {
    /// Project onto `{Y ⪰ 0 : ||Y||_F <= R}`.
    Project,
    /// Always zero.
    Zero,
    /// Keep the initial value.
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlConfig {
    /// `ε_k = eps0 * eps_factor^k`, floored at the target tolerance.
    pub eps0: f64,
    pub eps_factor: f64,
    /// Radius `R` of the safeguard ball.
    pub safeguard_radius: f64,
    pub safeguard: SafeguardPolicy,
    /// `ρ` is kept when `||V^k|| <= θ ||V^{k-1}||`.
    pub theta: f64,
    /// Penalty growth factor otherwise.
    pub gamma: f64,
    pub rho1: f64,
    /// `||x||` beyond which the run stops as unbounded.
    pub unbounded_radius: f64,
    pub inner: InnerConfig,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            eps0: 0.1,
            eps_factor: 0.5,
            safeguard_radius: 1e3,
            safeguard: SafeguardPolicy::Project,
            theta: 0.5,
            gamma: 10.0,
            rho1: 1.0,
            unbounded_radius: 1e6,
            inner: InnerConfig::default(),
        }
    }
}

impl AlConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma must exceed 1");
        }
        if !(self.safeguard_radius >= 0.0) {
            return bad("safeguard radius must be nonnegative");
        }
        if !(self.rho1 > 0.0) {
            return bad("rho1 must be positive");
        }
        if !(self.eps0 > 0.0 && self.eps_factor > 0.0 && self.eps_factor <= 1.0) {
            return bad("tolerance sequence must be positive and nonincreasing");
        }
        Ok(())
    }

    pub fn eps(&self, k: usize, floor: f64) -> f64 {
        (self.eps0 * self.eps_factor.powi(k as i32)).max(floor)
    }
}

/// Value of the augmented Lagrangian, computed without the gradient code.
pub fn al_value(problem: &dyn NsdpProblem, x: &[f64], rho: f64, ytilde: &SymMat) -> f64 {
    let a = problem.g(x).scale(-1.0).axpy(1.0 / rho, ytilde);
    let p = proj_psd(&a).map(|p| p.frobenius()).unwrap_or(f64::NAN);
    problem.f(x) + 0.5 * rho * p * p - ytilde.frobenius().powi(2) / (2.0 * rho)
}

/// `∇f(x) - DG(x)^*[ρ Π(-G(x) + Ỹ/ρ)]`.
pub fn al_gradient(problem: &dyn NsdpProblem, x: &[f64], rho: f64, ytilde: &SymMat) -> Vec<f64> {
    let shift = ytilde.scale(1.0 / rho);
    let (_, grad, _) = value_and_grad(problem, x, rho, &shift, ytilde.frobenius());
    grad
}

/// Value, gradient and `Π(-G(x) + shift)`.
fn value_and_grad(
    problem: &dyn NsdpProblem,
    x: &[f64],
    rho: f64,
    shift: &SymMat,
    ytilde_norm: f64,
) -> (f64, Vec<f64>, Option<SymMat>) {
    let a = &(-&problem.g(x)) + shift;
    let Ok(p) = proj_psd(&a) else {
        return (f64::NAN, vec![f64::NAN; problem.n()], None);
    };
    let pn = p.frobenius();
    let value = problem.f(x) + 0.5 * rho * pn * pn - ytilde_norm * ytilde_norm / (2.0 * rho);
    let y = p.scale(rho);
    let adj = adjoint_dg(problem, x, &y).unwrap_or_else(|_| vec![f64::NAN; problem.n()]);
    let grad = problem
        .grad_f(x)
        .iter()
        .zip(&adj)
        .map(|(g, a)| g - a)
        .collect();
    (value, grad, Some(p))
}

struct OuterStep {
    x: Vec<f64>,
    inner: InnerStats,
    y: SymMat,
    v: SymMat,
}

/// Step 1 and the multiplier read-out shared by both methods.
fn outer_step(
    problem: &dyn NsdpProblem,
    x_start: &[f64],
    rho: f64,
    ytilde: &SymMat,
    eps: f64,
    inner: &InnerConfig,
) -> Result<OuterStep, SolverError> {
    let shift = ytilde.scale(1.0 / rho);
    let yn = ytilde.frobenius();
    let mut fg = |x: &[f64]| {
        let (v, g, _) = value_and_grad(problem, x, rho, &shift, yn);
        (v, g)
    };
    let (x, stats) = inner_minimize(&mut fg, x_start, eps, inner);
    let a = &(-&problem.g(&x)) + &shift;
    let p = proj_psd(&a)?;
    let v = &p - &shift;
    Ok(OuterStep {
        x,
        inner: stats,
        y: p.scale(rho),
        v,
    })
}

fn make_record(
    problem: &dyn NsdpProblem,
    k: usize,
    rho: f64,
    eps: f64,
    ytilde: Option<&SymMat>,
    step: OuterStep,
) -> Result<IterRecord, SolverError> {
    let delta_vec = lagrangian_grad(problem, &step.x, &step.y)?;
    let residual = kkt_residual(problem, &step.x, &step.y)?;
    Ok(IterRecord {
        v_norm: Some(step.v.frobenius()),
        akkt: TraceRecord {
            k,
            x: step.x,
            y: step.y,
            delta_mat: step.v,
            delta_vec,
            rho: Some(rho),
        },
        ytilde: ytilde.cloned(),
        rho_kept: None,
        eps: Some(eps),
        inner: Some(step.inner),
        step: None,
        residual,
    })
}

fn check_start(problem: &dyn NsdpProblem, x0: &[f64]) -> Result<(), SolverError> {
    if x0.len() != problem.n() {
        return Err(SolverError::InvalidConfig(format!(
            "start point has {} entries, problem has {} variables",
            x0.len(),
            problem.n()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::InvalidConfig("start point is not finite".into()));
    }
    Ok(())
}

/// `Π_B(Y)` for the ball `{Y ⪰ 0 : ||Y||_F <= R}`; `Y` is already PSD.
fn safeguard_projection(y: &SymMat, radius: f64) -> SymMat {
    let n = y.frobenius();
    if radius == 0.0 {
        SymMat::zeros(y.dim())
    } else if n <= radius {
        y.clone()
    } else {
        y.scale(radius / n)
    }
}

pub fn solve_augmented_lagrangian(
    problem: &dyn NsdpProblem,
    x0: &[f64],
    cfg: &AlConfig,
    target_tol: f64,
    max_outer: usize,
) -> Result<SolverTrace, SolverError> {
    solve_augmented_lagrangian_from(problem, x0, &SymMat::zeros(problem.m()), cfg, target_tol, max_outer)
}

/// As [`solve_augmented_lagrangian`] with an initial safeguarded multiplier.
pub fn solve_augmented_lagrangian_from(
    problem: &dyn NsdpProblem,
    x0: &[f64],
    ytilde1: &SymMat,
    cfg: &AlConfig,
    target_tol: f64,
    max_outer: usize,
) -> Result<SolverTrace, SolverError> {
    cfg.validate()?;
    check_start(problem, x0)?;
    if max_outer == 0 {
        return Err(SolverError::InvalidConfig("max_outer must be positive".into()));
    }
    let initial = safeguard_projection(&proj_psd(ytilde1)?, cfg.safeguard_radius);
    let mut ytilde = initial.clone();
    let mut rho = cfg.rho1;
    let mut x = x0.to_vec();
    let mut v_prev = f64::INFINITY;
    let mut records: Vec<IterRecord> = Vec::new();
    for k in 1..=max_outer {
        let eps = cfg.eps(k, target_tol);
        let step = outer_step(problem, &x, rho, &ytilde, eps, &cfg.inner)?;
        let mut rec = make_record(problem, k, rho, eps, Some(&ytilde), step)?;
        x = rec.akkt.x.clone();
        let v_norm = rec.v_norm.unwrap_or(f64::INFINITY);
        let keep = k == 1 || v_norm <= cfg.theta * v_prev;
        rec.rho_kept = Some(keep);
        let done = rec.residual.max() <= target_tol;
        let unbounded = norm(&x) > cfg.unbounded_radius;
        let y = rec.akkt.y.clone();
        records.push(rec);
        if done {
            return Ok(trace("augmented_lagrangian", records, Termination::TargetReached));
        }
        if unbounded {
            return Ok(trace("augmented_lagrangian", records, Termination::Unbounded));
        }
        if !keep {
            rho *= cfg.gamma;
        }
        v_prev = v_norm;
        ytilde = match cfg.safeguard {
            SafeguardPolicy::Project => safeguard_projection(&y, cfg.safeguard_radius),
            SafeguardPolicy::Zero => SymMat::zeros(problem.m()),
            SafeguardPolicy::Hold => initial.clone(),
        };
    }
    Ok(trace("augmented_lagrangian", records, Termination::MaxOuter))
}

fn trace(solver: &str, records: Vec<IterRecord>, termination: Termination) -> SolverTrace {
    SolverTrace {
        solver: solver.to_string(),
        records,
        termination,
    }
}

/// A positive sequence indexed from `k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    /// `start * factor^(k-1)`, never below `floor`.
    Geometric { start: f64, factor: f64, floor: f64 },
    /// Explicit values; the last one repeats.
    Explicit { values: Vec<f64> },
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Geometric { start, factor, floor } => {
                (start * factor.powi(k as i32 - 1)).max(*floor)
            }
            Schedule::Explicit { values } => {
                values[(k - 1).min(values.len().saturating_sub(1))]
            }
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        let ok = match self {
            Schedule::Geometric { start, factor, floor } => {
                *start > 0.0 && *factor > 0.0 && *floor >= 0.0
            }
            Schedule::Explicit { values } => !values.is_empty() && values.iter().all(|v| *v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig("schedules must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub rho: Schedule,
    pub eps: Schedule,
    pub target_tol: f64,
    pub max_outer: usize,
    pub unbounded_radius: f64,
    pub inner: InnerConfig,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            rho: Schedule::Geometric {
                start: 10.0,
                factor: 10.0,
                floor: 0.0,
            },
            eps: Schedule::Geometric {
                start: 0.05,
                factor: 0.5,
                floor: 1e-8,
            },
            target_tol: 1e-6,
            max_outer: 30,
            unbounded_radius: 1e6,
            inner: InnerConfig::default(),
        }
    }
}

impl PenaltyConfig {
    /// Schedules that replay the `ρ_k` and `ε_k` of an existing trace.
    pub fn matching(trace: &SolverTrace, target_tol: f64, inner: InnerConfig) -> Self {
        PenaltyConfig {
            rho: Schedule::Explicit {
                values: trace.records.iter().filter_map(|r| r.akkt.rho).collect(),
            },
            eps: Schedule::Explicit {
                values: trace.records.iter().filter_map(|r| r.eps).collect(),
            },
            target_tol,
            max_outer: trace.records.len(),
            unbounded_radius: 1e6,
            inner,
        }
    }
}

pub fn solve_external_penalty(
    problem: &dyn NsdpProblem,
    x0: &[f64],
    cfg: &PenaltyConfig,
) -> Result<SolverTrace, SolverError> {
    check_start(problem, x0)?;
    cfg.rho.validate()?;
    cfg.eps.validate()?;
    if cfg.max_outer == 0 {
        return Err(SolverError::InvalidConfig("max_outer must be positive".into()));
    }
    let zero = SymMat::zeros(problem.m());
    let mut x = x0.to_vec();
    let mut records = Vec::new();
    for k in 1..=cfg.max_outer {
        let rho = cfg.rho.at(k);
        let eps = cfg.eps.at(k);
        let step = outer_step(problem, &x, rho, &zero, eps, &cfg.inner)?;
        let rec = make_record(problem, k, rho, eps, Some(&zero), step)?;
        x = rec.akkt.x.clone();
        let done = rec.residual.max() <= cfg.target_tol;
        records.push(rec);
        if done {
            return Ok(trace("penalty", records, Termination::TargetReached));
        }
        if norm(&x) > cfg.unbounded_radius {
            return Ok(trace("penalty", records, Termination::Unbounded));
        }
    }
    Ok(trace("penalty", records, Termination::MaxOuter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixPolyProblem, QuadForm};

    fn double_diag() -> MatrixPolyProblem {
        MatrixPolyProblem::new(
            QuadForm::linear(0.0, vec![1.0]),
            SymMat::zeros(2),
            vec![SymMat::identity(2)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = double_diag();
        let yt = SymMat::from_rows(&[vec![0.3, 0.1], vec![0.1, 0.2]]).unwrap();
        for &x in &[-0.7, -0.05, 0.02, 0.4] {
            let g = al_gradient(&p, &[x], 10.0, &yt)[0];
            let h = 1e-6;
            let fd = (al_value(&p, &[x + h], 10.0, &yt) - al_value(&p, &[x - h], 10.0, &yt)) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-5 * (1.0 + g.abs()), "{g} vs {fd}");
        }
    }

    #[test]
    fn al_converges_on_double_diagonal() {
        let p = double_diag();
        let t = solve_augmented_lagrangian(&p, &[1.0], &AlConfig::default(), 1e-6, 30).unwrap();
        assert_eq!(t.termination, Termination::TargetReached);
        assert!(t.last().akkt.x[0].abs() < 1e-5);
        assert!(t.last().residual.max() <= 1e-6);
    }

    #[test]
    fn interior_stationary_start_stops_at_once() {
        let p = MatrixPolyProblem::new(
            QuadForm {
                c0: 0.0,
                lin: vec![0.0],
                quad: vec![vec![1.0]],
            },
            SymMat::identity(2),
            vec![SymMat::zeros(2)],
            vec![],
        )
        .unwrap();
        let t = solve_external_penalty(&p, &[0.0], &PenaltyConfig::default()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.last().akkt.x, vec![0.0]);
        assert_eq!(t.termination, Termination::TargetReached);
    }

    #[test]
    fn rejects_bad_parameters() {
        let cfg = AlConfig {
            theta: 1.5,
            ..AlConfig::default()
        };
        assert!(solve_augmented_lagrangian(&double_diag(), &[1.0], &cfg, 1e-6, 5).is_err());
    }
}
