//! Dense symmetric linear algebra: eigendecomposition, projection onto the
//! PSD cone, eigenbases for the smallest eigenvalues and dependence tests.

pub mod dense;
pub mod eigen;
pub mod rank;
pub mod simplex;
pub mod symmat;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dense::Mat;
pub use eigen::{
    eig_basis_from_decomp, eig_basis_smallest, moreau_split, proj_psd, spectral_decompose,
    top_block, BasisOutcome, EigBasis, SpectralDecomp,
};
pub use rank::{
    family_rank, lin_dependent, lin_dependent_scaled, numerical_rank, pos_lin_dependent,
    pos_lin_dependent_scaled,
};
pub use symmat::SymMat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
}

/// Numerical tolerances shared by every module.
///
/// `orth`, `recon` and `psd` are base values; use the scaled accessors to
/// get the value for a given matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative cutoff for numerical rank.
    pub rank: f64,
    /// Residual below which the convex-combination program counts as zero.
    pub pld: f64,
    /// Orthonormality tolerance per unit of matrix order.
    pub orth: f64,
    /// Reconstruction tolerance, multiplied by `1 + ||M||_F`.
    pub recon: f64,
    /// PSD tolerance, multiplied by `1 + ||M||_F`.
    pub psd: f64,
    /// Coefficients below this magnitude are snapped to zero.
    pub snap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: 1e-7,
            pld: 1e-8,
            orth: 1e-10,
            recon: 1e-9,
            psd: 1e-9,
            snap: 1e-14,
        }
    }
}

impl Tolerances {
    pub fn orth_for(&self, m: usize) -> f64 {
        self.orth * m as f64
    }

    pub fn recon_for(&self, norm: f64) -> f64 {
        self.recon * (1.0 + norm)
    }

    pub fn psd_for(&self, norm: f64) -> f64 {
        self.psd * (1.0 + norm)
    }
}
