//! Dense phase-I simplex for the small feasibility programs behind the
//! positive-dependence test.

/// Smallest L1 residual `||sum_i alpha_i z_i||_1` over the simplex
/// `alpha >= 0, sum alpha = 1`, for unit vectors `z_i`.
///
/// Solved as the linear program
/// `min sum(s+ + s-)` s.t. `Z alpha + s+ - s- = 0`, `sum alpha + a = 1`,
/// with the slack `a` carrying cost `2 (n + 1)`. The start basis `(s+, a)`
/// is feasible, and since the residual of unit vectors is at most
/// `sqrt(n)`, rescaling `alpha` always beats keeping `a > 0`. Pivoting follows Bland's rule, which rules out
/// cycling on the degenerate zero right-hand side.
pub fn convex_zero_residual(vectors: &[Vec<f64>]) -> f64 {
    let p = vectors.len();
    if p == 0 {
        return f64::INFINITY;
    }
    let n = vectors[0].len();
    let rows = n + 1;
    // columns: alpha (p) | s+ (n) | s- (n) | a (1) | rhs
    let ncols = p + 2 * n + 1;
    let mut t = vec![vec![0.0; ncols + 1]; rows];
    for i in 0..n {
        for j in 0..p {
            t[i][j] = vectors[j][i];
        }
        t[i][p + i] = 1.0;
        t[i][p + n + i] = -1.0;
    }
    for j in 0..p {
        t[n][j] = 1.0;
    }
    t[n][p + 2 * n] = 1.0;
    t[n][ncols] = 1.0;

    let big = 2.0 * (n + 1) as f64;
    let cost: Vec<f64> = (0..ncols)
        .map(|j| match j {
            j if j < p => 0.0,
            j if j < p + 2 * n => 1.0,
            _ => big,
        })
        .collect();
    let mut basis: Vec<usize> = (0..n).map(|i| p + i).chain([p + 2 * n]).collect();

    const EPS: f64 = 1e-12;
    for _ in 0..10_000 {
        // reduced costs
        let entering = (0..ncols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let zj: f64 = (0..rows).map(|i| cost[basis[i]] * t[i][j]).sum();
            cost[j] - zj < -EPS
        });
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            if t[i][e] > EPS {
                let ratio = t[i][ncols] / t[i][e];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        // the objective is bounded below by zero, so a leaving row exists
        let Some((r, _)) = leave else { break };
        let piv = t[r][e];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[r] = e;
    }

    // recompute the residual from the primal alpha rather than trusting the
    // tableau objective
    let mut alpha = vec![0.0; p];
    for (i, &b) in basis.iter().enumerate() {
        if b < p {
            alpha[b] = t[i][ncols].max(0.0);
        }
    }
    let total: f64 = alpha.iter().sum();
    if total <= 0.0 {
        return f64::INFINITY;
    }
    (0..n)
        .map(|i| (0..p).map(|j| alpha[j] / total * vectors[j][i]).sum::<f64>().abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_vectors_cancel() {
        assert!(convex_zero_residual(&[vec![1.0, 0.0], vec![-1.0, 0.0]]) < 1e-14);
    }

    #[test]
    fn same_direction_keeps_distance() {
        let r = convex_zero_residual(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // best convex point of the segment in L1 is any point: |a| + |1-a| = 1
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_around_origin() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        assert!(convex_zero_residual(&v) < 1e-14);
    }
}
