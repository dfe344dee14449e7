//! Sampled error-bound ratios `dist(x, F) / ||Π(-G(x))||_F` near `x̄`.

use serde::{Deserialize, Serialize};

use super::sampling::{random_unit, sample_rng};
use super::{base_rank, CheckOptions, CqError, CqKind, CqStatus, CqVerdict};
use crate::linalg::dense::{norm, sub};
use crate::linalg::proj_psd;
use crate::model::{NsdpProblem, QuadForm, Reobjectived};
use crate::solvers::{solve_augmented_lagrangian, AlConfig, Termination};

/// Number of dyadic shells the ball is split into.
pub const MSR_SHELLS: usize = 6;

/// Target of the projection solves.
const PROJECTION_TOL: f64 = 1e-9;
const PROJECTION_MAX_OUTER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSource {
    /// The projection solve started at `x`.
    FromX,
    /// The projection solve started at `x̄`.
    FromXbar,
    /// `||x - x̄||`, the a priori upper bound.
    Xbar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrSample {
    pub shell: usize,
    /// Index of the direction; every direction is sampled once per shell.
    pub direction: usize,
    pub x: Vec<f64>,
    /// `||Π(-G(x))||_F`.
    pub residual: f64,
    /// Distance estimate (smallest over the feasible candidates).
    pub dist: f64,
    pub dist_source: DistanceSource,
    /// `dist / residual` when the residual exceeds `ε_rank`.
    pub ratio: Option<f64>,
    /// Whether at least one projection solve reached its target.
    pub projection_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrEstimate {
    pub radius: f64,
    pub samples: Vec<MsrSample>,
    /// Largest ratio; zero when no sample was infeasible.
    pub gamma_hat: f64,
    pub no_infeasible_samples: bool,
    pub failures: usize,
    /// More than 10% of the projection solves failed.
    pub unreliable: bool,
    /// Largest ratio per shell, outermost first.
    pub shell_max: Vec<f64>,
}

impl MsrEstimate {
    /// Largest growth of the ratio along a single direction: the ratio in
    /// the inner half of the shells over the ratio in the outermost shell
    /// holding one. Zero when no direction has both.
    pub fn growth(&self) -> f64 {
        let dirs = self.samples.iter().map(|s| s.direction + 1).max().unwrap_or(0);
        let mut outer = vec![None::<(usize, f64)>; dirs];
        let mut inner = vec![0.0f64; dirs];
        for s in &self.samples {
            let Some(r) = s.ratio else { continue };
            let o = &mut outer[s.direction];
            if o.is_none_or(|(shell, _)| s.shell < shell) {
                *o = Some((s.shell, r));
            }
            if s.shell >= MSR_SHELLS / 2 {
                inner[s.direction] = inner[s.direction].max(r);
            }
        }
        outer
            .iter()
            .zip(&inner)
            .filter_map(|(o, i)| o.filter(|(shell, r)| *shell < MSR_SHELLS / 2 && *r > 0.0).map(|(_, r)| i / r))
            .fold(0.0, f64::max)
    }

    /// Recomputes every residual and checks it against the recorded value.
    pub fn replay_residuals(&self, problem: &dyn NsdpProblem) -> Result<bool, CqError> {
        for s in &self.samples {
            if proj_psd(&-&problem.g(&s.x))?.frobenius() != s.residual {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn projection_config() -> AlConfig {
    AlConfig {
        eps0: 1e-2,
        ..AlConfig::default()
    }
}

/// `min ||z - x||^2  s.t.  G(z) ⪰ 0` from `start`. Returns the final point
/// if its infeasibility is within the target.
fn project(problem: &dyn NsdpProblem, x: &[f64], start: &[f64]) -> Result<(Option<Vec<f64>>, bool), CqError> {
    let n = x.len();
    let obj = QuadForm {
        c0: x.iter().map(|v| v * v).sum(),
        lin: x.iter().map(|v| -2.0 * v).collect(),
        quad: (0..n)
            .map(|i| (0..n).map(|j| if i == j { 2.0 } else { 0.0 }).collect())
            .collect(),
    };
    let p = Reobjectived { inner: problem, objective: obj };
    let trace = solve_augmented_lagrangian(&p, start, &projection_config(), PROJECTION_TOL, PROJECTION_MAX_OUTER)
        .map_err(|e| CqError::Invalid(format!("projection solve: {e}")))?;
    let last = trace.last();
    let ok = trace.termination == Termination::TargetReached;
    let feasible = last.residual.feasibility <= PROJECTION_TOL;
    Ok((feasible.then(|| last.akkt.x.clone()), ok))
}

/// Samples `samples` points in `B(x̄, radius)`, spread evenly over dyadic
/// shells `radius 2^-(s+1) <= ||x - x̄|| <= radius 2^-s` with each direction
/// visiting every shell at the same relative radius, and estimates the
/// distance to the feasible set by projection solves started at `x` and
/// at `x̄`, with `||x - x̄||` as upper bound.
pub fn estimate_msr_modulus(
    problem: &dyn NsdpProblem,
    xbar: &[f64],
    radius: f64,
    samples: usize,
    opts: &CheckOptions,
) -> Result<MsrEstimate, CqError> {
    base_rank(problem, xbar, &opts.tol)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CqError::Invalid("radius must be positive".into()));
    }
    let n = problem.n();
    let mut out = Vec::with_capacity(samples);
    let mut failures = 0;
    let mut shell_max = vec![0.0f64; MSR_SHELLS];
    for i in 0..samples {
        let shell = i % MSR_SHELLS;
        // The first 2n directions are ±e_i.
        let k = i / MSR_SHELLS;
        let mut rng = sample_rng(opts.seed, 40, k as u64);
        let d = if k < 2 * n {
            let mut e = vec![0.0; n];
            e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            e
        } else {
            random_unit(&mut rng, n)
        };
        let u: f64 = rand::Rng::random(&mut rng);
        let rad = radius * 0.5f64.powi(shell as i32) * (0.5 + 0.5 * u);
        let x: Vec<f64> = xbar.iter().zip(&d).map(|(a, b)| a + rad * b).collect();
        let residual = proj_psd(&-&problem.g(&x))?.frobenius();
        let mut dist = norm(&sub(&x, xbar));
        let mut source = DistanceSource::Xbar;
        let mut projection_ok = true;
        let mut ratio = None;
        if residual > opts.tol.rank {
            let (from_x, ok_x) = project(problem, &x, &x)?;
            let (from_bar, ok_bar) = project(problem, &x, xbar)?;
            projection_ok = ok_x || ok_bar;
            for (z, src) in [(from_x, DistanceSource::FromX), (from_bar, DistanceSource::FromXbar)] {
                if let Some(z) = z {
                    let dz = norm(&sub(&x, &z));
                    if dz < dist {
                        dist = dz;
                        source = src;
                    }
                }
            }
            let r = dist / residual;
            shell_max[shell] = shell_max[shell].max(r);
            ratio = Some(r);
        } else {
            dist = 0.0;
        }
        if !projection_ok {
            failures += 1;
        }
        out.push(MsrSample {
            shell,
            direction: k,
            x,
            residual,
            dist,
            dist_source: source,
            ratio,
            projection_ok,
        });
    }
    let ratios: Vec<f64> = out.iter().filter_map(|s| s.ratio).collect();
    let gamma_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(MsrEstimate {
        radius,
        no_infeasible_samples: ratios.is_empty(),
        gamma_hat,
        failures,
        unreliable: failures * 10 > samples,
        samples: out,
        shell_max,
    })
}

/// Metric subregularity: VIOLATED when the ratio along some direction grows
/// by at least `msr_growth` from the outer to the inner shells.
pub fn check_msr(problem: &dyn NsdpProblem, xbar: &[f64], opts: &CheckOptions) -> Result<CqVerdict, CqError> {
    opts.budget.validate()?;
    let rank = base_rank(problem, xbar, &opts.tol)?;
    let mut v = CqVerdict {
        condition: CqKind::Msr,
        status: CqStatus::NoViolationFound,
        rank,
        m: problem.m(),
        xbar: xbar.to_vec(),
        tolerances: opts.tol,
        budget: opts.budget,
        seed: opts.seed,
        witness: None,
        direction: None,
        msr: None,
        note: None,
    };
    if rank == problem.m() {
        v.status = CqStatus::CertifiedHolds;
        v.note = Some("G(x̄) is positive definite (r = m)".into());
        return Ok(v);
    }
    let est = estimate_msr_modulus(problem, xbar, opts.budget.msr_radius, opts.budget.msr_samples, opts)?;
    let growth = est.growth();
    if growth >= opts.budget.msr_growth {
        v.status = CqStatus::Violated;
    }
    v.note = Some(format!(
        "gamma_hat = {:e}, shell growth = {growth:e}{}",
        est.gamma_hat,
        if est.unreliable { ", unreliable: more than 10% of projection solves failed" } else { "" }
    ));
    v.msr = Some(est);
    Ok(v)
}
