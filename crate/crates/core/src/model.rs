//! Problem representation for `minimize f(x) subject to G(x) ⪰ 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dense::dot, SymMat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem data: {0}")]
    Invalid(String),
}

/// Objective, constraint map and their first derivatives.
pub trait NsdpProblem: Send + Sync {
    /// Number of decision variables.
    fn n(&self) -> usize;
    /// Order of the constraint matrix.
    fn m(&self) -> usize;
    fn f(&self, x: &[f64]) -> f64;
    fn grad_f(&self, x: &[f64]) -> Vec<f64>;
    fn g(&self, x: &[f64]) -> SymMat;
    /// Partial derivatives `D_{x_i} G(x)`, one matrix per variable.
    fn dg(&self, x: &[f64]) -> Vec<SymMat>;
}

/// `c0 + lin^T x + 1/2 x^T quad x` with a symmetric `quad`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    pub c0: f64,
    pub lin: Vec<f64>,
    pub quad: Vec<Vec<f64>>,
}

impl QuadForm {
    pub fn linear(c0: f64, lin: Vec<f64>) -> Self {
        let n = lin.len();
        QuadForm {
            c0,
            lin,
            quad: vec![vec![0.0; n]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.lin.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.c0 + dot(&self.lin, x);
        for (i, row) in self.quad.iter().enumerate() {
            v += 0.5 * x[i] * dot(row, x);
        }
        v
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.lin
            .iter()
            .zip(&self.quad)
            .map(|(l, row)| l + dot(row, x))
            .collect()
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.n();
        if self.quad.len() != n || self.quad.iter().any(|r| r.len() != n) {
            return Err(ModelError::Dimension(format!("quadratic term must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if self.quad[i][j] != self.quad[j][i] {
                    return Err(ModelError::Invalid(format!(
                        "quadratic term is not symmetric at ({j}, {i})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Coefficient `B_ij` of `x_i x_j` (with `i <= j`) in the constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadTerm {
    pub i: usize,
    pub j: usize,
    pub matrix: SymMat,
}

/// Degree-two matrix polynomial problem:
/// `f(x) = c0 + c_lin^T x + 1/2 x^T C x` and
/// `G(x) = A0 + sum_i x_i A_i + sum_{i<=j} x_i x_j B_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPolyProblem {
    pub objective: QuadForm,
    pub a0: SymMat,
    pub a_lin: Vec<SymMat>,
    pub b_quad: Vec<QuadTerm>,
}

impl MatrixPolyProblem {
    pub fn new(
        objective: QuadForm,
        a0: SymMat,
        a_lin: Vec<SymMat>,
        b_quad: Vec<QuadTerm>,
    ) -> Result<Self, ModelError> {
        objective.validate()?;
        let n = objective.n();
        let m = a0.dim();
        if a_lin.len() != n {
            return Err(ModelError::Dimension(format!(
                "expected {n} linear coefficient matrices, got {}",
                a_lin.len()
            )));
        }
        if let Some(bad) = a_lin.iter().position(|a| a.dim() != m) {
            return Err(ModelError::Dimension(format!(
                "linear coefficient {bad} has order {}, expected {m}",
                a_lin[bad].dim()
            )));
        }
        for t in &b_quad {
            if t.i > t.j || t.j >= n {
                return Err(ModelError::Invalid(format!(
                    "quadratic index ({}, {}) must satisfy i <= j < {n}",
                    t.i, t.j
                )));
            }
            if t.matrix.dim() != m {
                return Err(ModelError::Dimension(format!(
                    "quadratic coefficient ({}, {}) has order {}, expected {m}",
                    t.i,
                    t.j,
                    t.matrix.dim()
                )));
            }
        }
        Ok(MatrixPolyProblem {
            objective,
            a0,
            a_lin,
            b_quad,
        })
    }

    /// Replaces the objective, keeping the constraint.
    pub fn with_objective(&self, objective: QuadForm) -> Result<Self, ModelError> {
        Self::new(objective, self.a0.clone(), self.a_lin.clone(), self.b_quad.clone())
    }
}

impl NsdpProblem for MatrixPolyProblem {
    fn n(&self) -> usize {
        self.objective.n()
    }

    fn m(&self) -> usize {
        self.a0.dim()
    }

    fn f(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        self.objective.grad(x)
    }

    fn g(&self, x: &[f64]) -> SymMat {
        let mut g = self.a0.clone();
        for (xi, a) in x.iter().zip(&self.a_lin) {
            if *xi != 0.0 {
                g = g.axpy(*xi, a);
            }
        }
        for t in &self.b_quad {
            let w = x[t.i] * x[t.j];
            if w != 0.0 {
                g = g.axpy(w, &t.matrix);
            }
        }
        g
    }

    fn dg(&self, x: &[f64]) -> Vec<SymMat> {
        let mut out = self.a_lin.clone();
        for t in &self.b_quad {
            if t.i == t.j {
                out[t.i] = out[t.i].axpy(2.0 * x[t.i], &t.matrix);
            } else {
                out[t.i] = out[t.i].axpy(x[t.j], &t.matrix);
                out[t.j] = out[t.j].axpy(x[t.i], &t.matrix);
            }
        }
        out
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> SymMat + Send + Sync>;
type MatrixListFn = Arc<dyn Fn(&[f64]) -> Vec<SymMat> + Send + Sync>;

/// Problem given by user closures. Not serializable.
#[derive(Clone)]
pub struct CallbackProblem {
    n: usize,
    m: usize,
    f: ScalarFn,
    grad_f: VectorFn,
    g: MatrixFn,
    dg: MatrixListFn,
}

impl CallbackProblem {
    pub fn new(
        n: usize,
        m: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad_f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> SymMat + Send + Sync + 'static,
        dg: impl Fn(&[f64]) -> Vec<SymMat> + Send + Sync + 'static,
    ) -> Self {
        CallbackProblem {
            n,
            m,
            f: Arc::new(f),
            grad_f: Arc::new(grad_f),
            g: Arc::new(g),
            dg: Arc::new(dg),
        }
    }
}

impl NsdpProblem for CallbackProblem {
    fn n(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.m
    }
    fn f(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_f)(x)
    }
    fn g(&self, x: &[f64]) -> SymMat {
        (self.g)(x)
    }
    fn dg(&self, x: &[f64]) -> Vec<SymMat> {
        (self.dg)(x)
    }
}

/// A problem with its objective replaced by a quadratic, sharing the
/// constraint of `inner`.
pub struct Reobjectived<'a> {
    pub inner: &'a dyn NsdpProblem,
    pub objective: QuadForm,
}

impl NsdpProblem for Reobjectived<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn f(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }
    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        self.objective.grad(x)
    }
    fn g(&self, x: &[f64]) -> SymMat {
        self.inner.g(x)
    }
    fn dg(&self, x: &[f64]) -> Vec<SymMat> {
        self.inner.dg(x)
    }
}

/// Scalar inequality `g(x) >= 0` of a nonlinear program.
#[derive(Clone)]
pub enum ScalarConstraint {
    Poly(QuadForm),
    Callback { value: ScalarFn, grad: VectorFn },
}

impl ScalarConstraint {
    pub fn callback(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarConstraint::Callback {
            value: Arc::new(value),
            grad: Arc::new(grad),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarConstraint::Poly(q) => q.eval(x),
            ScalarConstraint::Callback { value, .. } => value(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ScalarConstraint::Poly(q) => q.grad(x),
            ScalarConstraint::Callback { grad, .. } => grad(x),
        }
    }
}

/// Nonlinear program `g_i(x) >= 0` written as `Diag(g_1(x), ..., g_m(x)) ⪰ 0`.
#[derive(Clone)]
pub struct DiagonalEmbedding {
    pub constraints: Vec<ScalarConstraint>,
    pub objective: QuadForm,
}

/// Builds the diagonal embedding of an NLP with objective `objective`.
pub fn embed_diagonal_nlp(
    objective: QuadForm,
    constraints: Vec<ScalarConstraint>,
) -> Result<DiagonalEmbedding, ModelError> {
    if constraints.is_empty() {
        return Err(ModelError::Invalid("at least one constraint is required".into()));
    }
    objective.validate()?;
    for (k, c) in constraints.iter().enumerate() {
        if let ScalarConstraint::Poly(q) = c {
            q.validate()?;
            if q.n() != objective.n() {
                return Err(ModelError::Dimension(format!(
                    "constraint {k} has {} variables, objective has {}",
                    q.n(),
                    objective.n()
                )));
            }
        }
    }
    Ok(DiagonalEmbedding {
        constraints,
        objective,
    })
}

impl DiagonalEmbedding {
    /// Exact matrix-polynomial form, available when every constraint is
    /// polynomial.
    pub fn to_matrix_poly(&self) -> Option<MatrixPolyProblem> {
        let n = self.objective.n();
        let m = self.constraints.len();
        let mut a0 = vec![0.0; m];
        let mut lin = vec![vec![0.0; m]; n];
        let mut quad: Vec<QuadTerm> = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            let ScalarConstraint::Poly(q) = c else {
                return None;
            };
            a0[k] = q.c0;
            for i in 0..n {
                lin[i][k] = q.lin[i];
                for j in i..n {
                    // 1/2 x^T Q x = sum_i Q_ii/2 x_i^2 + sum_{i<j} Q_ij x_i x_j
                    let w = if i == j { 0.5 * q.quad[i][i] } else { q.quad[i][j] };
                    if w == 0.0 {
                        continue;
                    }
                    match quad.iter_mut().find(|t| t.i == i && t.j == j) {
                        Some(t) => t.matrix.set(k, k, w),
                        None => {
                            let mut d = SymMat::zeros(m);
                            d.set(k, k, w);
                            quad.push(QuadTerm { i, j, matrix: d });
                        }
                    }
                }
            }
        }
        MatrixPolyProblem::new(
            self.objective.clone(),
            SymMat::from_diag(&a0),
            lin.iter().map(|d| SymMat::from_diag(d)).collect(),
            quad,
        )
        .ok()
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    pub fn grads(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.constraints.iter().map(|c| c.grad(x)).collect()
    }
}

impl NsdpProblem for DiagonalEmbedding {
    fn n(&self) -> usize {
        self.objective.n()
    }
    fn m(&self) -> usize {
        self.constraints.len()
    }
    fn f(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }
    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        self.objective.grad(x)
    }
    fn g(&self, x: &[f64]) -> SymMat {
        SymMat::from_diag(&self.values(x))
    }
    fn dg(&self, x: &[f64]) -> Vec<SymMat> {
        let grads = self.grads(x);
        (0..self.n())
            .map(|i| SymMat::from_diag(&grads.iter().map(|g| g[i]).collect::<Vec<_>>()))
            .collect()
    }
}

fn check_dims(problem: &dyn NsdpProblem, x: &[f64], y: &SymMat) -> Result<(), ModelError> {
    if x.len() != problem.n() {
        return Err(ModelError::Dimension(format!(
            "point has {} entries, problem has {} variables",
            x.len(),
            problem.n()
        )));
    }
    if y.dim() != problem.m() {
        return Err(ModelError::Dimension(format!(
            "multiplier has order {}, constraint has order {}",
            y.dim(),
            problem.m()
        )));
    }
    Ok(())
}

/// `DG(x)^*[Y]`: component `i` is `<D_{x_i} G(x), Y>`.
pub fn adjoint_dg(problem: &dyn NsdpProblem, x: &[f64], y: &SymMat) -> Result<Vec<f64>, ModelError> {
    check_dims(problem, x, y)?;
    Ok(problem.dg(x).iter().map(|d| d.inner(y)).collect())
}

/// `DG(x)[d] = sum_i d_i D_{x_i} G(x)`.
pub fn apply_dg(dg: &[SymMat], d: &[f64]) -> SymMat {
    let mut out = SymMat::zeros(dg.first().map_or(0, SymMat::dim));
    for (di, a) in d.iter().zip(dg) {
        if *di != 0.0 {
            out = out.axpy(*di, a);
        }
    }
    out
}

/// `∇_x L(x, Y) = ∇f(x) - DG(x)^*[Y]` for `L(x, Y) = f(x) - <G(x), Y>`.
pub fn lagrangian_grad(
    problem: &dyn NsdpProblem,
    x: &[f64],
    y: &SymMat,
) -> Result<Vec<f64>, ModelError> {
    let adj = adjoint_dg(problem, x, y)?;
    Ok(problem
        .grad_f(x)
        .iter()
        .zip(&adj)
        .map(|(g, a)| g - a)
        .collect())
}

/// Central-difference step used by the derivative audit.
pub fn fd_step(xi: f64) -> f64 {
    1e-6 * (1.0 + xi.abs())
}

/// Central-difference approximation of `D_{x_i} G(x)`.
pub fn fd_dg(problem: &dyn NsdpProblem, x: &[f64]) -> Vec<SymMat> {
    (0..problem.n())
        .map(|i| {
            let h = fd_step(x[i]);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (&problem.g(&xp) - &problem.g(&xm)).scale(0.5 / h)
        })
        .collect()
}

/// Largest deviation between `dg` and its central-difference estimate,
/// relative to `1 + ||dg||`.
pub fn fd_audit(problem: &dyn NsdpProblem, x: &[f64]) -> f64 {
    let exact = problem.dg(x);
    let approx = fd_dg(problem, x);
    let scale: f64 = exact.iter().map(|d| d.frobenius().powi(2)).sum::<f64>().sqrt();
    let err: f64 = exact
        .iter()
        .zip(&approx)
        .map(|(a, b)| (a - b).frobenius().powi(2))
        .sum::<f64>()
        .sqrt();
    err / (1.0 + scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_multiplier_problem() -> MatrixPolyProblem {
        let ones = SymMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let swap = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        MatrixPolyProblem::new(
            QuadForm::linear(0.0, vec![-1.0]),
            SymMat::zeros(2),
            vec![ones],
            vec![QuadTerm {
                i: 0,
                j: 0,
                matrix: swap,
            }],
        )
        .unwrap()
    }

    #[test]
    fn polynomial_constraint_values() {
        let p = no_multiplier_problem();
        let g = p.g(&[-0.1]);
        assert!((g.get(0, 0) + 0.1).abs() < 1e-15);
        assert!((g.get(0, 1) + 0.09).abs() < 1e-15);
        let dg = p.dg(&[0.5]);
        assert_eq!(dg[0].get(0, 1), 2.0);
        assert_eq!(dg[0].get(0, 0), 1.0);
    }

    #[test]
    fn adjoint_matches_trace_expansion() {
        let p = no_multiplier_problem();
        let y = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let adj = adjoint_dg(&p, &[0.0], &y).unwrap();
        assert_eq!(adj, vec![1.0 + 4.0 + 3.0]);
        assert_eq!(adjoint_dg(&p, &[0.0], &SymMat::zeros(2)).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = no_multiplier_problem();
        assert!(adjoint_dg(&p, &[0.0, 1.0], &SymMat::zeros(2)).is_err());
        assert!(lagrangian_grad(&p, &[0.0], &SymMat::zeros(3)).is_err());
    }

    #[test]
    fn diagonal_embedding_matches_nlp() {
        let e = embed_diagonal_nlp(
            QuadForm::linear(0.0, vec![1.0]),
            vec![
                ScalarConstraint::Poly(QuadForm::linear(0.0, vec![1.0])),
                ScalarConstraint::Poly(QuadForm::linear(0.0, vec![-1.0])),
            ],
        )
        .unwrap();
        let g = e.g(&[0.3]);
        assert_eq!(g.diag(), vec![0.3, -0.3]);
        assert!(g.is_diagonal());
        let poly = e.to_matrix_poly().unwrap();
        assert_eq!(poly.g(&[0.3]), g);
        let y = SymMat::from_diag(&[2.0, 0.5]);
        assert_eq!(adjoint_dg(&e, &[0.3], &y).unwrap(), vec![1.5]);
    }

    #[test]
    fn callback_audit_is_small() {
        let p = CallbackProblem::new(
            1,
            1,
            |x| x[0],
            |_| vec![1.0],
            |x| SymMat::from_diag(&[x[0].sin()]),
            |x| vec![SymMat::from_diag(&[x[0].cos()])],
        );
        assert!(fd_audit(&p, &[0.7]) < 1e-8);
    }
}
