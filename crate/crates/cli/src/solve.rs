use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use nsdp::linalg::SymMat;
use nsdp::model::NsdpProblem;
use nsdp::solvers::{
    solve_augmented_lagrangian, solve_external_penalty, solve_sqp, AlConfig, PenaltyConfig, SolverTrace, SqpConfig,
    Termination,
};

use crate::source::{load, write_atomic};
use crate::{SolverKind, SourceArgs};

/// Multiplier norm past which the summary warns about divergence.
const DIVERGENCE_NORM: f64 = 1e3;

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub tol: f64,
    /// Outer iterations of the augmented Lagrangian and SQP methods; the
    /// penalty method uses `penalty.max_outer`.
    pub max_iter: usize,
    pub al: AlConfig,
    pub penalty: PenaltyConfig,
    pub sqp: SqpConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-6,
            max_iter: 60,
            al: AlConfig::default(),
            penalty: PenaltyConfig::default(),
            sqp: SqpConfig::default(),
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<SolveConfig> {
    let Some(path) = path else {
        return Ok(SolveConfig::default());
    };
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&src).with_context(|| format!("parsing {}", path.display()))
}

pub fn solve_with(
    problem: &dyn NsdpProblem,
    x0: &[f64],
    solver: SolverKind,
    cfg: &SolveConfig,
) -> Result<SolverTrace, nsdp::solvers::SolverError> {
    match solver {
        SolverKind::Penalty => {
            let p = PenaltyConfig {
                target_tol: cfg.tol,
                ..cfg.penalty.clone()
            };
            solve_external_penalty(problem, x0, &p)
        }
        SolverKind::Al => solve_augmented_lagrangian(problem, x0, &cfg.al, cfg.tol, cfg.max_iter),
        SolverKind::Sqp => solve_sqp(problem, x0, &SymMat::zeros(problem.m()), &cfg.sqp, cfg.tol, cfg.max_iter),
    }
}

pub fn summary(name: &str, trace: &SolverTrace) -> String {
    let last = trace.last();
    let r = &last.residual;
    let mut s = String::new();
    let _ = writeln!(s, "problem        {name}");
    let _ = writeln!(s, "solver         {}", trace.solver);
    let _ = writeln!(s, "termination    {}", serde_json::to_value(trace.termination).unwrap().as_str().unwrap_or("?"));
    let _ = writeln!(s, "iterations     {}", trace.records.len());
    let _ = writeln!(s, "x              {:?}", last.akkt.x);
    let _ = writeln!(s, "stationarity   {:e}", r.stationarity);
    let _ = writeln!(s, "feasibility    {:e}", r.feasibility);
    let _ = writeln!(s, "complementarity {:e}", r.complementarity);
    let _ = writeln!(s, "dual           {:e}", r.dual_feasibility);
    let y = last.akkt.y.frobenius();
    let _ = writeln!(s, "|Y|_F          {y:e}");
    let first = trace.records.first().map_or(0.0, |r| r.akkt.y.frobenius());
    if y >= DIVERGENCE_NORM && y > 10.0 * first {
        let _ = writeln!(
            s,
            "note           multiplier estimates diverge (|Y|_F grew from {first:e} to {y:e}); the limit may admit no KKT multiplier"
        );
    }
    s
}

pub fn run(
    source: &SourceArgs,
    solver: SolverKind,
    config: Option<&Path>,
    x0: Option<Vec<f64>>,
    out_dir: &Path,
) -> Result<u8> {
    let file = load(source)?;
    let cfg = load_config(config)?;
    let Some(x0) = x0.or_else(|| file.start.clone()).or_else(|| file.reference.clone()) else {
        bail!("no start point: pass --x0 or add [start] to the problem file");
    };
    if x0.len() != file.problem.n() {
        bail!("start point has {} entries, problem has {} variables", x0.len(), file.problem.n());
    }
    let trace = solve_with(&file.problem, &x0, solver, &cfg)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let stem = format!("{}-{}", file.name, solver.name());
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    let trace_path = out_dir.join(format!("{stem}.trace.jsonl"));
    write_atomic(&trace_path, &buf)?;
    let text = summary(&file.name, &trace);
    write_atomic(&out_dir.join(format!("{stem}.summary.txt")), text.as_bytes())?;
    print!("{text}");
    println!("trace          {}", trace_path.display());
    Ok(match trace.termination {
        t if t.converged() => 0,
        Termination::MaxOuter => 2,
        _ => 3,
    })
}
