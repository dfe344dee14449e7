//! Regression runner: fixture verdicts, solver traces, the implication
//! order and randomized property checks.
//!
//! The report is JSON lines. The first line holds the run time and is
//! excluded from the SHA-256 written next to it.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use nsdp::cq::{
    estimate_msr_modulus, implication_violations, nlp_constant_rank_check, run_check, CheckOptions, CqKind,
    MsrEstimate, NlpCq,
};
use nsdp::fixtures::{fixture, fixtures, ProblemFile};
use nsdp::kkt::akkt_check;
use nsdp::linalg::{moreau_split, proj_psd, spectral_decompose, SymMat, Tolerances};
use nsdp::model::{MatrixPolyProblem, NsdpProblem, QuadForm};
use nsdp::solvers::{al_gradient, al_value, SolverTrace};

use crate::solve::{solve_with, SolveConfig};
use crate::source::{load_dir, write_atomic};
use crate::{SolverKind, Suite};

/// Fixture whose error-bound modulus is exactly one.
const MSR_FIXTURE: &str = "linear-indefinite";

struct Report {
    lines: Vec<Value>,
    failures: Vec<String>,
    residuals: csv::Writer<Vec<u8>>,
    ratios: csv::Writer<Vec<u8>>,
}

impl Report {
    fn new() -> Result<Self> {
        let mut residuals = csv::Writer::from_writer(Vec::new());
        residuals.write_record([
            "fixture",
            "solver",
            "k",
            "stationarity",
            "feasibility",
            "complementarity",
            "dual_feasibility",
            "rho",
        ])?;
        let mut ratios = csv::Writer::from_writer(Vec::new());
        ratios.write_record(["fixture", "sample", "shell", "direction", "norm_dx", "residual", "dist", "ratio"])?;
        Ok(Report {
            lines: Vec::new(),
            failures: Vec::new(),
            residuals,
            ratios,
        })
    }

    fn push(&mut self, mut entry: Value, ok: bool, failure: impl FnOnce() -> String) {
        entry["ok"] = json!(ok);
        if !ok {
            self.failures.push(failure());
        }
        self.lines.push(entry);
    }

    fn trace_rows(&mut self, fixture: &str, trace: &SolverTrace) -> Result<()> {
        for r in &trace.records {
            let res = &r.residual;
            self.residuals.write_record([
                fixture.to_string(),
                trace.solver.clone(),
                r.akkt.k.to_string(),
                format!("{:e}", res.stationarity),
                format!("{:e}", res.feasibility),
                format!("{:e}", res.complementarity),
                format!("{:e}", res.dual_feasibility),
                r.akkt.rho.map_or(String::new(), |v| format!("{v:e}")),
            ])?;
        }
        Ok(())
    }

    fn ratio_rows(&mut self, fixture: &str, xbar: &[f64], est: &MsrEstimate) -> Result<()> {
        for (i, s) in est.samples.iter().enumerate() {
            let dx: f64 = s.x.iter().zip(xbar).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            self.ratios.write_record([
                fixture.to_string(),
                i.to_string(),
                s.shell.to_string(),
                s.direction.to_string(),
                format!("{dx:e}"),
                format!("{:e}", s.residual),
                format!("{:e}", s.dist),
                s.ratio.map_or(String::new(), |v| format!("{v:e}")),
            ])?;
        }
        Ok(())
    }
}

fn check_fixtures(report: &mut Report, files: &[ProblemFile], seed: u64) -> Result<()> {
    for f in files {
        let Some(xbar) = f.reference.clone() else {
            report.push(json!({"kind": "fixture", "fixture": f.name}), false, || {
                format!("{}: no reference point", f.name)
            });
            continue;
        };
        let opts = CheckOptions {
            seed,
            curves: f.curves.clone(),
            ..CheckOptions::default()
        };
        let mut table = Vec::new();
        for kind in CqKind::ALL {
            let v = run_check(&f.problem, &xbar, kind, &opts).map_err(|e| anyhow!("{} {kind}: {e}", f.name))?;
            let expected = f.expected.get(&kind).copied();
            let ok = expected.is_none_or(|e| e == v.status);
            if let Some(est) = &v.msr {
                report.ratio_rows(&f.name, &xbar, est)?;
            }
            table.push((kind, v.status));
            report.push(
                json!({"kind": "verdict", "fixture": f.name, "check": kind, "status": v.status, "expected": expected}),
                ok,
                || format!("{} {kind}: got {} expected {}", f.name, v.status, expected.unwrap()),
            );
        }
        let bad = implication_violations(&table);
        let names: Vec<String> = bad.iter().map(|(a, b)| format!("{a} => {b}")).collect();
        report.push(
            json!({"kind": "implication", "fixture": f.name, "violations": names}),
            bad.is_empty(),
            || format!("{}: implication order violated: {names:?}", f.name),
        );
        if let Some(nlp) = &f.nlp {
            for (kind, weak) in [(NlpCq::Crcq, CqKind::WeakCrcq), (NlpCq::Cpld, CqKind::WeakCpld)] {
                let v = nlp_constant_rank_check(nlp, &xbar, kind, &opts)?;
                let sdp = table.iter().find(|(k, _)| *k == weak).map(|(_, s)| *s);
                let expected = f.nlp_expected.get(&kind).copied();
                let ok = sdp == Some(v.status) && expected.is_none_or(|e| e == v.status);
                report.push(
                    json!({"kind": "nlp", "fixture": f.name, "check": kind, "status": v.status, "sdp_status": sdp, "expected": expected}),
                    ok,
                    || format!("{} nlp {kind:?}: got {} (SDP side {sdp:?}, expected {expected:?})", f.name, v.status),
                );
            }
        }
    }
    Ok(())
}

fn check_solvers(report: &mut Report, files: &[ProblemFile]) -> Result<()> {
    let cfg = SolveConfig::default();
    let tol = Tolerances::default();
    for f in files {
        let Some(x0) = f.start.clone().or_else(|| f.reference.clone()) else {
            continue;
        };
        for solver in [SolverKind::Penalty, SolverKind::Al, SolverKind::Sqp] {
            let trace = solve_with(&f.problem, &x0, solver, &cfg).map_err(|e| anyhow!("{} {}: {e}", f.name, solver.name()))?;
            report.trace_rows(&f.name, &trace)?;
            let converged = trace.termination.converged();
            // only convergent traces have to certify approximate KKT
            let akkt = if converged {
                Some(akkt_check(&f.problem, &trace.certificate(), 1e-4, &tol)?.passed)
            } else {
                None
            };
            let last = trace.last();
            report.push(
                json!({
                    "kind": "solver",
                    "fixture": f.name,
                    "solver": solver.name(),
                    "termination": trace.termination,
                    "iterations": trace.records.len(),
                    "final_residual": last.residual.max(),
                    "multiplier_norm": last.akkt.y.frobenius(),
                    "akkt_passed": akkt,
                }),
                akkt != Some(false),
                || format!("{} {}: convergent trace fails the AKKT check", f.name, solver.name()),
            );
        }
    }
    Ok(())
}

fn random_sym(r: &mut ChaCha8Rng, m: usize, scale: f64) -> SymMat {
    let mut s = SymMat::zeros(m);
    for i in 0..m {
        for j in i..m {
            s.set(i, j, scale * r.random_range(-1.0..1.0));
        }
    }
    s
}

fn moreau_case(r: &mut ChaCha8Rng) -> Result<(), String> {
    let m = r.random_range(1..=6);
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let a = random_sym(r, m, scale);
    let (p, n) = moreau_split(&a).map_err(|e| e.to_string())?;
    let tol = 1e-12 * (1.0 + a.frobenius());
    let recon = (&(&p - &n) - &a).frobenius();
    let orth = p.inner(&n).abs();
    let lmin = spectral_decompose(&p).unwrap().min_value().min(spectral_decompose(&n).unwrap().min_value());
    if recon > tol || orth > tol * (1.0 + a.frobenius()) || lmin < -tol {
        return Err(format!("recon {recon:e}, <P,N> {orth:e}, lambda_min {lmin:e}"));
    }
    Ok(())
}

fn projection_case(r: &mut ChaCha8Rng) -> Result<(), String> {
    let m = r.random_range(1..=6);
    let a = random_sym(r, m, 1.0);
    let p = proj_psd(&a).map_err(|e| e.to_string())?;
    let resid = &a - &p;
    let tol = 1e-10 * (1.0 + a.frobenius()).powi(2);
    for _ in 0..10 {
        let b = random_sym(r, m, 1.0);
        let z = spectral_decompose(&b).unwrap().map_values(|v| v.max(0.0));
        if resid.inner(&(&z - &p)) > tol {
            return Err("variational inequality violated".into());
        }
    }
    Ok(())
}

fn al_gradient_case(r: &mut ChaCha8Rng) -> Result<(), String> {
    let n = r.random_range(1..=3);
    let m = r.random_range(1..=3);
    let lin: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let p = MatrixPolyProblem::new(
        QuadForm::linear(0.0, lin),
        random_sym(r, m, 1.0),
        (0..n).map(|_| random_sym(r, m, 1.0)).collect(),
        vec![],
    )
    .map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let rho = 10f64.powf(r.random_range(-1.0..2.0));
    let yt = spectral_decompose(&random_sym(r, m, 1.0)).unwrap().map_values(|v| v.max(0.0));
    let g = al_gradient(&p, &x, rho, &yt);
    let h = 1e-6;
    for i in 0..n {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[i] += h;
        xm[i] -= h;
        let fd = (al_value(&p, &xp, rho, &yt) - al_value(&p, &xm, rho, &yt)) / (2.0 * h);
        if (fd - g[i]).abs() > 1e-5 * (1.0 + fd.abs()) * (1.0 + rho) {
            return Err(format!("component {i}: {} vs {fd}", g[i]));
        }
    }
    Ok(())
}

fn check_properties(report: &mut Report, seed: u64, cases: u64) {
    type Case = fn(&mut ChaCha8Rng) -> Result<(), String>;
    let suites: [(&str, Case); 3] = [
        ("moreau", moreau_case),
        ("projection", projection_case),
        ("al-gradient", al_gradient_case),
    ];
    for (i, (name, case)) in suites.into_iter().enumerate() {
        let mut first = None;
        let mut failures = 0;
        for c in 0..cases {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 32) ^ c);
            if let Err(e) = case(&mut r) {
                failures += 1;
                first.get_or_insert(format!("case {c}: {e}"));
            }
        }
        report.push(
            json!({"kind": "property", "name": name, "cases": cases, "failures": failures}),
            failures == 0,
            || format!("property {name}: {failures} failures, first {}", first.unwrap_or_default()),
        );
    }
}

fn check_msr(report: &mut Report, seed: u64) -> Result<()> {
    let f = fixture(MSR_FIXTURE).ok_or_else(|| anyhow!("missing fixture {MSR_FIXTURE}"))?;
    let xbar = f.reference.clone().unwrap_or_else(|| vec![0.0; f.problem.n()]);
    let opts = CheckOptions {
        seed,
        ..CheckOptions::default()
    };
    let est = estimate_msr_modulus(&f.problem, &xbar, 0.1, 200, &opts)?;
    report.ratio_rows(&f.name, &xbar, &est)?;
    let ok = (0.99..=1.01).contains(&est.gamma_hat);
    report.push(
        json!({"kind": "msr", "fixture": f.name, "samples": est.samples.len(), "gamma_hat": est.gamma_hat, "failures": est.failures}),
        ok,
        || format!("{}: max ratio {} outside [0.99, 1.01]", f.name, est.gamma_hat),
    );
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(suite: Suite, fixtures_dir: Option<&Path>, seed: u64, cases: u64, out_dir: &Path) -> Result<u8> {
    let files = match fixtures_dir {
        Some(dir) => load_dir(dir)?,
        None => fixtures(),
    };
    let mut report = Report::new()?;
    if matches!(suite, Suite::Full | Suite::Fixtures) {
        check_fixtures(&mut report, &files, seed)?;
    }
    if matches!(suite, Suite::Full | Suite::Solvers) {
        check_solvers(&mut report, &files)?;
    }
    if matches!(suite, Suite::Full | Suite::Properties) {
        check_properties(&mut report, seed, cases);
    }
    if suite == Suite::Msr {
        check_msr(&mut report, seed)?;
    }

    let mut body = String::new();
    for line in &report.lines {
        body.push_str(&serde_json::to_string(line)?);
        body.push('\n');
    }
    body.push_str(&serde_json::to_string(&json!({"kind": "summary", "entries": report.lines.len(), "failures": report.failures.len()}))?);
    body.push('\n');
    let hash = hex(&Sha256::digest(body.as_bytes()));
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let header = serde_json::to_string(&json!({"generated_unix": stamp, "seed": seed}))?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_atomic(&out_dir.join("report.jsonl"), format!("{header}\n{body}").as_bytes())?;
    write_atomic(&out_dir.join("report.sha256"), format!("{hash}\n").as_bytes())?;
    let residuals = report.residuals.into_inner().map_err(|e| anyhow!("{e}"))?;
    let ratios = report.ratios.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_atomic(&out_dir.join("residuals.csv"), &residuals)?;
    write_atomic(&out_dir.join("msr_ratios.csv"), &ratios)?;

    for f in &report.failures {
        println!("FAIL {f}");
    }
    println!(
        "{} entries, {} failures; report hash {hash}; files in {}",
        report.lines.len(),
        report.failures.len(),
        out_dir.display()
    );
    Ok(if report.failures.is_empty() { 0 } else { 1 })
}
