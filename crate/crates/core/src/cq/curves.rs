//! Registered witness curves: explicit sequences `(x(t), Δ(t), E(t))`
//! tried before random sampling.

use serde::{Deserialize, Serialize};

use super::CqError;
use crate::linalg::{Mat, SymMat};

/// Name of the curve for `G(x) = Diag(x, -x)` whose basis gives
/// `v_11 = 1 - (x+1)^2` and `v_22 = (x+1)^2 - 1`.
pub const DIAG_OPPOSITE_STATED: &str = "diag-opposite-stated";
/// Name of the curve for `G(x) = Diag(x, -x)` using the perturbation
///
/// ```text
/// Δ = 1/(1+(x+1)^2) [[-x(x-1)^2, x(x+1)], [x(x+1), x + 2x(x+1)^2]]
/// ```
///
/// with `E` read off the eigendecomposition of `G(x) + Δ`.
pub const DIAG_OPPOSITE_PRINTED: &str = "diag-opposite-printed";

pub const NAMED_CURVES: &[&str] = &[DIAG_OPPOSITE_STATED, DIAG_OPPOSITE_PRINTED];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessCurve {
    /// `x = x̄ + t d`, no perturbation.
    Ray { direction: Vec<f64> },
    Named { name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x: Vec<f64>,
    pub delta: Option<SymMat>,
    /// Basis to use instead of one computed from `G(x) + Δ`.
    pub basis: Option<Mat>,
}

impl WitnessCurve {
    pub fn label(&self) -> String {
        match self {
            WitnessCurve::Ray { direction } => format!("ray {direction:?}"),
            WitnessCurve::Named { name } => name.clone(),
        }
    }

    pub fn is_ray(&self) -> bool {
        matches!(self, WitnessCurve::Ray { .. })
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), CqError> {
        match self {
            WitnessCurve::Ray { direction } => {
                if direction.len() != n {
                    return Err(CqError::Dimension(format!(
                        "ray has {} entries, problem has {n} variables",
                        direction.len()
                    )));
                }
                if direction.iter().all(|v| *v == 0.0) || direction.iter().any(|v| !v.is_finite()) {
                    return Err(CqError::Invalid("ray direction must be finite and nonzero".into()));
                }
            }
            WitnessCurve::Named { name } => {
                if !NAMED_CURVES.contains(&name.as_str()) {
                    return Err(CqError::UnknownCurve(name.clone()));
                }
                if n != 1 || m != 2 {
                    return Err(CqError::Dimension(format!("curve {name} needs n = 1 and m = 2")));
                }
            }
        }
        Ok(())
    }

    pub fn point(&self, xbar: &[f64], t: f64) -> CurvePoint {
        match self {
            WitnessCurve::Ray { direction } => CurvePoint {
                x: xbar.iter().zip(direction).map(|(a, d)| a + t * d).collect(),
                delta: None,
                basis: None,
            },
            WitnessCurve::Named { name } => {
                let x = xbar[0] + t;
                let s = x + 1.0;
                match name.as_str() {
                    DIAG_OPPOSITE_STATED => {
                        let a = (1.0 - 0.5 * s * s).sqrt();
                        let b = s * std::f64::consts::FRAC_1_SQRT_2;
                        let basis = Mat::from_rows(&[vec![a, -b], vec![b, a]]);
                        // distinct eigenvalues 2|t| > |t| make this basis the
                        // unique one up to signs, columns in descending order
                        let w = [2.0 * t.abs(), t.abs()];
                        let target = SymMat::from_weighted_columns(&basis, &w);
                        let g = SymMat::from_diag(&[x, -x]);
                        CurvePoint {
                            x: vec![x],
                            delta: Some(&target - &g),
                            basis: Some(basis),
                        }
                    }
                    _ => {
                        let c = 1.0 / (1.0 + s * s);
                        let delta = SymMat::from_rows(&[
                            vec![-c * x * (x - 1.0).powi(2), c * x * s],
                            vec![c * x * s, c * (x + 2.0 * x * s * s)],
                        ])
                        .expect("symmetric by construction");
                        CurvePoint {
                            x: vec![x],
                            delta: Some(delta),
                            basis: None,
                        }
                    }
                }
            }
        }
    }

    /// Limit of the curve's basis as `t -> 0`, when the curve fixes one.
    pub fn limit_basis(&self) -> Option<Mat> {
        match self {
            WitnessCurve::Named { name } if name == DIAG_OPPOSITE_STATED => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Some(Mat::from_rows(&[vec![s, -s], vec![s, s]]))
            }
            _ => None,
        }
    }
}
