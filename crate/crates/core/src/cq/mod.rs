//! Constraint-qualification diagnostics.
//!
//! Every check returns a three-valued [`CqVerdict`]. Conditions quantified
//! over all sequences can be falsified by sampling but not certified, so
//! `CertifiedHolds` is only returned when the question is decidable
//! (`r = m`, the full nondegeneracy family, a primal Robinson direction).

pub mod checks;
pub mod curves;
pub mod implication;
pub mod msr;
pub mod nlp;
pub mod perturb;
pub mod sampling;
pub mod vfamily;
pub mod witness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Tolerances};
use crate::model::{ModelError, NsdpProblem};

pub use checks::{check_nondegeneracy, check_robinson, check_seq_cq, check_weak_cq};
pub use curves::WitnessCurve;
pub use implication::{implication_closure, implication_violations, IMPLICATIONS};
pub use msr::{check_msr, estimate_msr_modulus, MsrEstimate, MsrSample};
pub use nlp::{nlp_constant_rank_check, NlpCq, NlpVerdict};
pub use perturb::separating_perturbation;
pub use vfamily::{v_family, v_family_of_columns, VFamily};
pub use witness::{Dependence, ReplayReport, Witness, WitnessPoint, WitnessSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CqError {
    #[error("point is infeasible: lambda_min(G) = {lambda_min:e} below -{tolerance:e}")]
    Infeasible { lambda_min: f64, tolerance: f64 },
    #[error("m - r = {0} exceeds the subset enumeration cap of 12")]
    TooManySmallEigenvalues(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown witness curve {0:?}")]
    UnknownCurve(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CqKind {
    Nondegeneracy,
    Robinson,
    WeakNondegeneracy,
    WeakRobinson,
    WeakCrcq,
    WeakCpld,
    SeqCrcq,
    SeqCpld,
    Msr,
}

impl CqKind {
    pub const ALL: [CqKind; 9] = [
        CqKind::Nondegeneracy,
        CqKind::Robinson,
        CqKind::WeakNondegeneracy,
        CqKind::WeakRobinson,
        CqKind::WeakCrcq,
        CqKind::WeakCpld,
        CqKind::SeqCrcq,
        CqKind::SeqCpld,
        CqKind::Msr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CqKind::Nondegeneracy => "nondegeneracy",
            CqKind::Robinson => "robinson",
            CqKind::WeakNondegeneracy => "weak-nondegeneracy",
            CqKind::WeakRobinson => "weak-robinson",
            CqKind::WeakCrcq => "weak-crcq",
            CqKind::WeakCpld => "weak-cpld",
            CqKind::SeqCrcq => "seq-crcq",
            CqKind::SeqCpld => "seq-cpld",
            CqKind::Msr => "msr",
        }
    }
}

impl fmt::Display for CqKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CqKind {
    type Err = CqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CqKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .or(match s {
                "nondeg" => Some(CqKind::Nondegeneracy),
                "weak-nondeg" => Some(CqKind::WeakNondegeneracy),
                _ => None,
            })
            .ok_or_else(|| CqError::Invalid(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CqStatus {
    CertifiedHolds,
    NoViolationFound,
    Violated,
}

impl CqStatus {
    pub fn name(self) -> &'static str {
        match self {
            CqStatus::CertifiedHolds => "CERTIFIED_HOLDS",
            CqStatus::NoViolationFound => "NO_VIOLATION_FOUND",
            CqStatus::Violated => "VIOLATED",
        }
    }
}

impl fmt::Display for CqStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CqStatus {
    type Err = CqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CERTIFIED_HOLDS" => Ok(CqStatus::CertifiedHolds),
            "NO_VIOLATION_FOUND" => Ok(CqStatus::NoViolationFound),
            "VIOLATED" => Ok(CqStatus::Violated),
            other => Err(CqError::Invalid(format!("unknown status {other:?}"))),
        }
    }
}

/// Sampling parameters. Recorded in every verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Random unit directions, on top of the `±` coordinate ones.
    pub directions: usize,
    /// Haar rotations of the limit basis.
    pub n_q: usize,
    pub t0: f64,
    /// Shrink levels `t_k = t0 2^-k`, `k = 0..levels`.
    pub levels: usize,
    /// Consecutive deepest levels on which independence must be observed.
    pub stable_levels: usize,
    /// Perturbed `(x, E)` draws per candidate limit basis and subset.
    pub neighborhood_draws: usize,
    pub robinson_iterations: usize,
    pub robinson_restarts: usize,
    pub msr_radius: f64,
    pub msr_samples: usize,
    /// Ratio growth between the outer and the inner shells that counts as
    /// an unbounded error bound.
    pub msr_growth: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            directions: 32,
            n_q: 64,
            t0: 0.1,
            levels: 12,
            stable_levels: 3,
            neighborhood_draws: 8,
            robinson_iterations: 200,
            robinson_restarts: 10,
            msr_radius: 0.1,
            msr_samples: 200,
            msr_growth: 10.0,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<(), CqError> {
        if !(8..=20).contains(&self.levels) {
            return Err(CqError::Invalid("levels must lie in 8..=20".into()));
        }
        if self.stable_levels == 0 || self.stable_levels > self.levels {
            return Err(CqError::Invalid("stable_levels must lie in 1..=levels".into()));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) || !(self.msr_radius > 0.0) {
            return Err(CqError::Invalid("t0 and msr_radius must be positive".into()));
        }
        if !(self.msr_growth > 1.0) {
            return Err(CqError::Invalid("msr_growth must exceed 1".into()));
        }
        Ok(())
    }

    pub fn level_t(&self, k: usize) -> f64 {
        self.t0 * 0.5f64.powi(k as i32)
    }
}

/// Everything a check needs besides the problem and the point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckOptions {
    pub budget: Budget,
    pub seed: u64,
    pub tol: Tolerances,
    /// Tried before any random sample.
    pub curves: Vec<WitnessCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqVerdict {
    pub condition: CqKind,
    pub status: CqStatus,
    /// Numerical rank of `G(x̄)`.
    pub rank: usize,
    pub m: usize,
    pub xbar: Vec<f64>,
    pub tolerances: Tolerances,
    pub budget: Budget,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Robinson direction `d` with `λ_min(G + DG d) > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msr: Option<MsrEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Feasibility check shared by all diagnostics; returns the rank of `G(x̄)`.
pub(crate) fn base_rank(problem: &dyn NsdpProblem, xbar: &[f64], tol: &Tolerances) -> Result<usize, CqError> {
    if xbar.len() != problem.n() {
        return Err(CqError::Dimension(format!(
            "point has {} entries, problem has {} variables",
            xbar.len(),
            problem.n()
        )));
    }
    let g = problem.g(xbar);
    let d = crate::linalg::spectral_decompose(&g)?;
    let lmin = d.min_value();
    let allowed = tol.psd_for(g.frobenius());
    if lmin < -allowed {
        return Err(CqError::Infeasible {
            lambda_min: lmin,
            tolerance: allowed,
        });
    }
    let r = crate::kkt::constraint_rank(&g, tol)?;
    let m = problem.m();
    if m - r > 12 {
        return Err(CqError::TooManySmallEigenvalues(m - r));
    }
    Ok(r)
}

/// Runs one check by kind.
pub fn run_check(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    kind: CqKind,
    opts: &CheckOptions,
) -> Result<CqVerdict, CqError> {
    match kind {
        CqKind::Nondegeneracy => check_nondegeneracy(problem, xbar, opts),
        CqKind::Robinson => check_robinson(problem, xbar, opts),
        CqKind::WeakNondegeneracy | CqKind::WeakRobinson | CqKind::WeakCrcq | CqKind::WeakCpld => {
            check_weak_cq(problem, xbar, kind, opts)
        }
        CqKind::SeqCrcq | CqKind::SeqCpld => check_seq_cq(problem, xbar, kind, opts),
        CqKind::Msr => check_msr(problem, xbar, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in CqKind::ALL {
            assert_eq!(k.name().parse::<CqKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("weak-foo".parse::<CqKind>().is_err());
    }

    #[test]
    fn status_serializes_upper_case() {
        assert_eq!(serde_json::to_string(&CqStatus::NoViolationFound).unwrap(), "\"NO_VIOLATION_FOUND\"");
        assert_eq!("VIOLATED".parse::<CqStatus>().unwrap(), CqStatus::Violated);
    }

    #[test]
    fn budget_bounds() {
        assert!(Budget::default().validate().is_ok());
        let b = Budget { levels: 4, ..Budget::default() };
        assert!(b.validate().is_err());
    }
}
