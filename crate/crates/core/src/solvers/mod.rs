//! External penalty, safeguarded augmented Lagrangian and SQP solvers.
//! Every solver returns a [`SolverTrace`] whose records form an
//! approximate-KKT certificate.

pub mod al;
pub mod inner;
pub mod sqp;
pub mod trace;

use thiserror::Error;

use crate::kkt::KktError;
use crate::linalg::LinalgError;
use crate::model::ModelError;

pub use al::{
    al_gradient, al_value, solve_augmented_lagrangian, solve_augmented_lagrangian_from,
    solve_external_penalty, AlConfig, PenaltyConfig, SafeguardPolicy, Schedule,
};
pub use inner::{inner_minimize, InnerConfig, InnerExit, InnerStats};
pub use sqp::{solve_sqp, HessianPolicy, SqpConfig};
pub use trace::{read_certificate, IterRecord, SolverTrace, StepInfo, Termination};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Kkt(#[from] KktError),
}
