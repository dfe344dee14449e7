//! Unconstrained minimization of a C¹ function: limited-memory BFGS
//! directions with Armijo backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::linalg::dense::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    pub max_iter: usize,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Sufficient-decrease constant of the line search.
    pub armijo: f64,
    /// Iterations without a 0.1% improvement of the best gradient norm
    /// before the solve is declared stagnant.
    pub plateau: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            max_iter: 5000,
            memory: 5,
            armijo: 1e-4,
            plateau: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerExit {
    Converged,
    MaxIter,
    Stagnated,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerStats {
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub value: f64,
    pub exit: InnerExit,
}

/// Minimizes `fg`, which returns the value and gradient at a point.
///
/// The returned point is the best one seen (lowest gradient norm among the
/// accepted iterates, which all decrease the value), so `f(x) <= f(x_start)`.
pub fn inner_minimize(
    fg: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>),
    x_start: &[f64],
    grad_tol: f64,
    cfg: &InnerConfig,
) -> (Vec<f64>, InnerStats) {
    let mut x = x_start.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut evals = 1;
    let mut gnorm = norm(&g);
    let mut best = (x.clone(), f, gnorm);
    let mut best_iter = 0;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    let stats = |iterations, evaluations, best: &(Vec<f64>, f64, f64), exit| InnerStats {
        iterations,
        evaluations,
        grad_norm: best.2,
        value: best.1,
        exit,
    };

    if !(gnorm > grad_tol) {
        let exit = if gnorm.is_finite() { InnerExit::Converged } else { InnerExit::LineSearchFailed };
        return (x, stats(0, evals, &best, exit));
    }

    for iter in 1..=cfg.max_iter {
        let mut d = two_loop(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        // first step of a steepest-descent direction is scaled to unit length
        let mut step = if pairs.is_empty() { 1.0 / gnorm.max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = fg(&trial);
            evals += 1;
            if ft.is_finite() && ft <= f + cfg.armijo * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if pairs.is_empty() {
                return (best.0.clone(), stats(iter, evals, &best, InnerExit::LineSearchFailed));
            }
            pairs.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
        gnorm = norm(&g);
        if gnorm < best.2 {
            if gnorm < best.2 * (1.0 - 1e-3) {
                best_iter = iter;
            }
            best = (x.clone(), f, gnorm);
        }
        if gnorm <= grad_tol {
            return (x, stats(iter, evals, &best, InnerExit::Converged));
        }
        if iter - best_iter >= cfg.plateau {
            return (best.0.clone(), stats(iter, evals, &best, InnerExit::Stagnated));
        }
    }
    (best.0.clone(), stats(cfg.max_iter, evals, &best, InnerExit::MaxIter))
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_quadratic() {
        // f = 1/2 x^T A x - b^T x with A = [[3,1],[1,2]]
        let mut fg = |x: &[f64]| {
            let ax = [3.0 * x[0] + x[1], x[0] + 2.0 * x[1]];
            let f = 0.5 * (x[0] * ax[0] + x[1] * ax[1]) - (x[0] + x[1]);
            (f, vec![ax[0] - 1.0, ax[1] - 1.0])
        };
        let (x, st) = inner_minimize(&mut fg, &[5.0, -3.0], 1e-10, &InnerConfig::default());
        assert_eq!(st.exit, InnerExit::Converged);
        assert!((x[0] - 0.2).abs() < 1e-9 && (x[1] - 0.4).abs() < 1e-9);
        assert!(st.iterations < 30);
    }

    #[test]
    fn already_stationary() {
        let mut fg = |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]);
        let (x, st) = inner_minimize(&mut fg, &[0.0], 1e-8, &InnerConfig::default());
        assert_eq!(x, vec![0.0]);
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn rosenbrock_descends() {
        let mut fg = |x: &[f64]| {
            let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
            (
                a * a + 100.0 * b * b,
                vec![-2.0 * a - 400.0 * x[0] * b, 200.0 * b],
            )
        };
        let (x, st) = inner_minimize(&mut fg, &[-1.2, 1.0], 1e-8, &InnerConfig::default());
        assert_eq!(st.exit, InnerExit::Converged);
        assert!((x[0] - 1.0).abs() < 1e-6);
    }
}
