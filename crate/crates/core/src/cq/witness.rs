use serde::{Deserialize, Serialize};

use super::vfamily::{diag_family_with, v_family_of_columns};
use super::CqError;
use crate::linalg::{lin_dependent_scaled, pos_lin_dependent_scaled, Mat, SymMat, Tolerances};
use crate::model::NsdpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    Linear,
    Positive,
}

impl Dependence {
    pub fn holds(self, family: &[Vec<f64>], scale: f64, tol: &Tolerances) -> bool {
        match self {
            Dependence::Linear => lin_dependent_scaled(family, scale, tol),
            Dependence::Positive => pos_lin_dependent_scaled(family, scale, tol),
        }
    }
}

/// Where the violating data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessSource {
    /// Evaluated at `x̄` only.
    BasePoint,
    /// `x^k = x̄ + t_k d`.
    Ray { direction: Vec<f64> },
    /// A registered curve.
    Curve { name: String },
    /// Sampled near `(x̄, Ē)`: `x = x̄ + t d`, `E` a projected perturbation
    /// of `Ē` and `Δ` the separating perturbation.
    Neighborhood { direction: Vec<f64>, draw: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<SymMat>,
    pub basis: Mat,
    /// `v_ii(x, E)` for `i` in the subset.
    pub family: Vec<Vec<f64>>,
    pub independent: bool,
}

/// Data reproducing a violation.
///
/// The limit family is dependent (linearly or positively, per `test`)
/// while, for sequence witnesses, every recorded point has a linearly
/// independent family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub source: WitnessSource,
    pub xbar: Vec<f64>,
    /// Zero-based column indices `J`.
    pub subset: Vec<usize>,
    pub test: Dependence,
    /// Whether the family holds every `v_ij`, `i <= j`, rather than `v_ii`.
    #[serde(default)]
    pub full_family: bool,
    /// Vectors with norm at most `ε_rank * scale` count as zero.
    pub scale: f64,
    pub limit_basis: Mat,
    pub limit_family: Vec<Vec<f64>>,
    pub limit_dependent: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<WitnessPoint>,
    /// Number of limit bases examined that all failed.
    pub limits_checked: usize,
}

/// How a replay compared with the recorded witness.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub families_identical: bool,
    pub pattern_identical: bool,
    /// The recorded pattern is a violation: dependent limit, independent
    /// points.
    pub violating: bool,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.families_identical && self.pattern_identical && self.violating
    }
}

fn subset_columns(basis: &Mat, subset: &[usize]) -> Mat {
    basis.select_columns(subset)
}

impl Witness {
    /// Recomputes every family and dependence flag from the problem.
    pub fn replay(&self, problem: &dyn NsdpProblem, tol: &Tolerances) -> Result<ReplayReport, CqError> {
        if self.xbar.len() != problem.n() || self.limit_basis.rows() != problem.m() {
            return Err(CqError::Dimension("witness does not match the problem".into()));
        }
        if self.subset.iter().any(|&i| i >= self.limit_basis.cols()) {
            return Err(CqError::Invalid("subset index outside the basis".into()));
        }
        let limit_family = if self.full_family {
            v_family_of_columns(problem, &self.xbar, &self.limit_basis).all()
        } else {
            diag_family_with(&problem.dg(&self.xbar), &subset_columns(&self.limit_basis, &self.subset))
        };
        let limit_dependent = self.test.holds(&limit_family, self.scale, tol);
        let mut identical = limit_family == self.limit_family;
        let mut pattern = limit_dependent == self.limit_dependent;
        let mut violating = self.limit_dependent;
        for p in &self.points {
            let fam = diag_family_with(&problem.dg(&p.x), &subset_columns(&p.basis, &self.subset));
            let independent = !lin_dependent_scaled(&fam, self.scale, tol);
            identical &= fam == p.family;
            pattern &= independent == p.independent;
            violating &= p.independent;
        }
        Ok(ReplayReport {
            families_identical: identical,
            pattern_identical: pattern,
            violating,
        })
    }
}
