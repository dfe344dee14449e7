//! KKT residuals, approximate-KKT certificates from solver traces, and
//! multiplier recovery along a trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caratheodory::{reduce, ConicCombination};
use crate::cq::vfamily::diag_family_of_columns;
use crate::linalg::dense::norm;
use crate::linalg::{
    numerical_rank, pos_lin_dependent_scaled, proj_psd, spectral_decompose, LinalgError, Mat,
    SymMat, Tolerances,
};
use crate::model::{lagrangian_grad, ModelError, NsdpProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("trace has {usable} usable iterates, at least {needed} are needed")]
    TraceTooShort { usable: usize, needed: usize },
}

/// The four KKT residuals of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `||∇f(x) - DG(x)^*[Y]||`
    pub stationarity: f64,
    /// `||Π(-G(x))||_F`
    pub feasibility: f64,
    /// `|<G(x), Y>|`
    pub complementarity: f64,
    /// `max(0, -λ_min(Y))`
    pub dual_feasibility: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.complementarity)
            .max(self.dual_feasibility)
    }
}

pub fn kkt_residual(
    problem: &dyn NsdpProblem,
    x: &[f64],
    y: &SymMat,
) -> Result<KktResidual, KktError> {
    let grad = lagrangian_grad(problem, x, y)?;
    let g = problem.g(x);
    let infeas = proj_psd(&-&g)?;
    let ydec = spectral_decompose(y)?;
    Ok(KktResidual {
        stationarity: norm(&grad),
        feasibility: infeas.frobenius(),
        complementarity: g.inner(y).abs(),
        dual_feasibility: (-ydec.min_value()).max(0.0),
    })
}

/// Rank of `G` at a reference point, measured against `max(1, ||G||_F)`.
pub fn constraint_rank(g: &SymMat, tol: &Tolerances) -> Result<usize, LinalgError> {
    let d = spectral_decompose(g)?;
    Ok(numerical_rank(&d.values, g.frobenius().max(1.0), tol.rank))
}

/// `ρ Π(-G(x))`, the multiplier estimate attached to a penalty iterate.
pub fn penalty_multiplier(
    problem: &dyn NsdpProblem,
    x: &[f64],
    rho: f64,
) -> Result<SymMat, KktError> {
    Ok(proj_psd(&-&problem.g(x))?.scale(rho))
}

/// One iterate of an approximate-KKT sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// Multiplier `Y^k`.
    pub y: SymMat,
    /// Constraint perturbation `Δ^k`.
    pub delta_mat: SymMat,
    /// Stationarity perturbation `δ^k = ∇_x L(x^k, Y^k)`.
    pub delta_vec: Vec<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
}

/// A sequence of iterates with multipliers and perturbations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AkktCertificate {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AkktFailure {
    Empty,
    Stationarity,
    PerturbedInfeasible,
    Complementarity,
    MultiplierNotPsd,
    PerturbationNotSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkktReport {
    pub passed: bool,
    /// Index into the record list of the first failing record.
    pub first_failure: Option<usize>,
    pub failure: Option<AkktFailure>,
    /// `max(||δ||, ||Δ||_F)` of the last record.
    pub final_perturbation: f64,
}

/// Verifies the per-iterate identities of an approximate-KKT sequence and
/// that the last perturbations are below `tol`.
pub fn akkt_check(
    problem: &dyn NsdpProblem,
    cert: &AkktCertificate,
    tol: f64,
    tols: &Tolerances,
) -> Result<AkktReport, KktError> {
    let fail = |idx: usize, why: AkktFailure, last: f64| AkktReport {
        passed: false,
        first_failure: Some(idx),
        failure: Some(why),
        final_perturbation: last,
    };
    let Some(last) = cert.records.last() else {
        return Ok(fail(0, AkktFailure::Empty, f64::INFINITY));
    };
    let final_perturbation = norm(&last.delta_vec).max(last.delta_mat.frobenius());
    for (idx, rec) in cert.records.iter().enumerate() {
        let grad = lagrangian_grad(problem, &rec.x, &rec.y)?;
        let scale = 1.0 + norm(&problem.grad_f(&rec.x)) + norm(&grad);
        let gap: f64 = grad
            .iter()
            .zip(&rec.delta_vec)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if rec.delta_vec.len() != grad.len() || gap > 1e-10 * scale {
            return Ok(fail(idx, AkktFailure::Stationarity, final_perturbation));
        }
        let shifted = &problem.g(&rec.x) + &rec.delta_mat;
        let sd = spectral_decompose(&shifted)?;
        if sd.min_value() < -tols.psd_for(shifted.frobenius()) {
            return Ok(fail(idx, AkktFailure::PerturbedInfeasible, final_perturbation));
        }
        let ynorm = rec.y.frobenius();
        if shifted.inner(&rec.y).abs() > 1e-8 * (1.0 + ynorm) {
            return Ok(fail(idx, AkktFailure::Complementarity, final_perturbation));
        }
        if spectral_decompose(&rec.y)?.min_value() < -tols.psd_for(ynorm) {
            return Ok(fail(idx, AkktFailure::MultiplierNotPsd, final_perturbation));
        }
    }
    if final_perturbation > tol {
        return Ok(fail(
            cert.records.len() - 1,
            AkktFailure::PerturbationNotSmall,
            final_perturbation,
        ));
    }
    Ok(AkktReport {
        passed: true,
        first_failure: None,
        failure: None,
        final_perturbation,
    })
}

/// Rules for estimating coefficient limits along a finite trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Number of trailing entries whose median estimates a limit.
    pub median_window: usize,
    /// Growth of the largest coefficient across the trailing half that
    /// counts as divergence.
    pub divergence_factor: f64,
    /// Minimum number of iterates.
    pub min_iterates: usize,
    /// Residual below which the recovered multiplier is accepted.
    pub kkt_tol: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            median_window: 3,
            divergence_factor: 10.0,
            min_iterates: 1,
            kkt_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Recovered,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// Eigen-slots (columns of the multiplier basis) whose coefficients grow.
    pub subset: Vec<usize>,
    /// `v_ii(x̄, Ē)` for `i` in `subset`.
    pub limit_family: Vec<Vec<f64>>,
    pub positively_dependent: bool,
    /// Largest reduced coefficient at the start and the end of the trailing half.
    pub growth: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub status: RecoveryStatus,
    /// Rank of `G(x̄)` used to size the multiplier basis.
    pub rank: usize,
    pub multiplier: Option<SymMat>,
    pub residual: Option<KktResidual>,
    pub divergence: Option<DivergenceReport>,
    /// Reduced coefficients per usable iterate, indexed by eigen-slot.
    pub coefficients: Vec<Vec<f64>>,
}

/// Rewrites each `Y^k` as a conic combination of `v_ii(x^k, E^k)` over the
/// eigenvectors of its `m - r` largest eigenvalues, reduces it to an
/// independent sub-family and estimates the limit of the reduced
/// coefficients.
pub fn recover_multiplier(
    problem: &dyn NsdpProblem,
    cert: &AkktCertificate,
    xbar: &[f64],
    cfg: &RecoveryConfig,
    tols: &Tolerances,
) -> Result<Recovery, KktError> {
    let usable: Vec<&TraceRecord> = cert
        .records
        .iter()
        .filter(|r| r.y.is_finite() && r.x.iter().all(|v| v.is_finite()))
        .collect();
    if usable.len() < cfg.min_iterates {
        return Err(KktError::TraceTooShort {
            usable: usable.len(),
            needed: cfg.min_iterates,
        });
    }
    let m = problem.m();
    let rank = constraint_rank(&problem.g(xbar), tols)?;
    if rank == m {
        let zero = SymMat::zeros(m);
        let residual = kkt_residual(problem, xbar, &zero)?;
        let status = if residual.max() <= cfg.kkt_tol {
            RecoveryStatus::Recovered
        } else {
            RecoveryStatus::Inconclusive
        };
        return Ok(Recovery {
            status,
            rank,
            multiplier: Some(zero),
            residual: Some(residual),
            divergence: None,
            coefficients: vec![Vec::new(); usable.len()],
        });
    }
    let width = m - rank;

    let mut coefficients = Vec::with_capacity(usable.len());
    let mut last_basis = Mat::zeros(m, width);
    for rec in &usable {
        let dec = spectral_decompose(&rec.y)?;
        let basis = Mat::from_columns(m, &(0..width).map(|i| dec.vectors.column(i)).collect::<Vec<_>>());
        let family = diag_family_of_columns(problem, &rec.x, &basis);
        let cut = tols.rank * rec.y.frobenius().max(1.0);
        let lambdas: Vec<f64> = dec.values[..width]
            .iter()
            .map(|&l| if l > cut { l } else { 0.0 })
            .collect();
        let comb = ConicCombination {
            vectors: family,
            coeffs: lambdas,
        };
        let red = reduce(&comb, tols);
        let mut slots = vec![0.0; width];
        for (&i, &a) in red.indices.iter().zip(&red.coeffs) {
            slots[i] = a;
        }
        coefficients.push(slots);
        last_basis = basis;
    }

    let count = coefficients.len();
    let half_start = count / 2;
    let max_at = |k: usize| coefficients[k].iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let (early, late) = (max_at(half_start), max_at(count - 1));
    if late > cfg.divergence_factor * early.max(tols.rank) {
        let last = &coefficients[count - 1];
        let subset: Vec<usize> = (0..width).filter(|&i| last[i] != 0.0).collect();
        let all = diag_family_of_columns(problem, xbar, &last_basis);
        let limit_family: Vec<Vec<f64>> = subset.iter().map(|&i| all[i].clone()).collect();
        let scale = dg_scale(problem, xbar);
        let positively_dependent = pos_lin_dependent_scaled(&limit_family, scale, tols);
        return Ok(Recovery {
            status: RecoveryStatus::Diverged,
            rank,
            multiplier: None,
            residual: None,
            divergence: Some(DivergenceReport {
                subset,
                limit_family,
                positively_dependent,
                growth: (early, late),
            }),
            coefficients,
        });
    }

    let window = cfg.median_window.min(count).max(1);
    let limits: Vec<f64> = (0..width)
        .map(|i| {
            let mut tail: Vec<f64> = coefficients[count - window..].iter().map(|c| c[i]).collect();
            tail.sort_by(f64::total_cmp);
            tail[tail.len() / 2]
        })
        .collect();
    let weights: Vec<f64> = limits.iter().map(|&a| a.max(0.0)).collect();
    let y_star = SymMat::from_weighted_columns(&last_basis, &weights);
    let residual = kkt_residual(problem, xbar, &y_star)?;
    let status = if residual.max() <= cfg.kkt_tol {
        RecoveryStatus::Recovered
    } else {
        RecoveryStatus::Inconclusive
    };
    Ok(Recovery {
        status,
        rank,
        multiplier: Some(y_star),
        residual: Some(residual),
        divergence: None,
        coefficients,
    })
}

/// `max(1, ||DG(x)||)`, the magnitude against which v-vectors count as zero.
pub fn dg_scale(problem: &dyn NsdpProblem, x: &[f64]) -> f64 {
    problem
        .dg(x)
        .iter()
        .map(|d| d.frobenius().powi(2))
        .sum::<f64>()
        .sqrt()
        .max(1.0)
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
    fn exact_kkt_pair_has_zero_residual() {
        let p = double_diag();
        let r = kkt_residual(&p, &[0.0], &SymMat::from_diag(&[1.0, 0.0])).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn feasible_point_with_zero_multiplier() {
        let p = double_diag();
        let r = kkt_residual(&p, &[2.0], &SymMat::zeros(2)).unwrap();
        assert_eq!(r.stationarity, 1.0);
        assert_eq!(r.feasibility, 0.0);
        assert_eq!(r.complementarity, 0.0);
    }

    #[test]
    fn penalty_multiplier_scales_with_rho() {
        let p = double_diag();
        let y1 = penalty_multiplier(&p, &[-0.5], 10.0).unwrap();
        let y2 = penalty_multiplier(&p, &[-0.5], 20.0).unwrap();
        assert!((&y2 - &y1.scale(2.0)).frobenius() < 1e-14);
        assert_eq!(penalty_multiplier(&p, &[0.5], 10.0).unwrap(), SymMat::zeros(2));
    }

    #[test]
    fn replicated_kkt_pair_passes() {
        let p = double_diag();
        let rec = TraceRecord {
            k: 1,
            x: vec![0.0],
            y: SymMat::from_diag(&[1.0, 0.0]),
            delta_mat: SymMat::zeros(2),
            delta_vec: vec![0.0],
            rho: None,
        };
        let cert = AkktCertificate {
            records: vec![rec.clone(), rec.clone(), rec],
        };
        let rep = akkt_check(&p, &cert, 1e-6, &Tolerances::default()).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn constant_perturbation_fails_trailing_check() {
        let p = double_diag();
        let records = (1..=4)
            .map(|k| TraceRecord {
                k,
                x: vec![0.0],
                y: SymMat::from_diag(&[1.0, 0.0]),
                delta_mat: SymMat::from_diag(&[0.0, 0.5]),
                delta_vec: vec![0.0],
                rho: None,
            })
            .collect();
        let rep = akkt_check(&p, &AkktCertificate { records }, 1e-4, &Tolerances::default()).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.failure, Some(AkktFailure::PerturbationNotSmall));
        assert_eq!(rep.first_failure, Some(3));
    }

    #[test]
    fn short_trace_is_an_error() {
        let p = double_diag();
        let err = recover_multiplier(
            &p,
            &AkktCertificate::default(),
            &[0.0],
            &RecoveryConfig::default(),
            &Tolerances::default(),
        )
        .unwrap_err();
        assert!(matches!(err, KktError::TraceTooShort { usable: 0, .. }));
    }
}
