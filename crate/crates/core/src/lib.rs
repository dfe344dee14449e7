//! Nonlinear semidefinite programming: `minimize f(x) subject to G(x) ⪰ 0`.
//!
//! The crate provides penalty, augmented Lagrangian and SQP solvers that emit
//! approximate-KKT traces, and a sampling-based diagnostic suite for
//! eigenvector-based constraint qualifications.

pub mod linalg;
pub mod caratheodory;
pub mod model;
pub mod cq;
pub mod kkt;
pub mod solvers;
pub mod fixtures;
