//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::Rng;

use nsdp::cq::{
    estimate_msr_modulus, implication_violations, nlp_constant_rank_check, run_check, v_family_of_columns,
    CheckOptions, CqKind, CqStatus, CqVerdict, NlpCq, WitnessSource,
};
use nsdp::fixtures::{fixture, fixtures, ProblemFile};
use nsdp::kkt::{akkt_check, kkt_residual, recover_multiplier, RecoveryConfig, RecoveryStatus};
use nsdp::linalg::{Mat, SymMat, Tolerances};
use nsdp::model::NsdpProblem;
use nsdp::solvers::{
    solve_augmented_lagrangian, solve_external_penalty, solve_sqp, AlConfig, PenaltyConfig, SafeguardPolicy,
    SqpConfig,
};

type Outcome = Result<String, String>;

struct Run {
    file: ProblemFile,
    verdicts: BTreeMap<CqKind, CqVerdict>,
}

impl Run {
    fn status(&self, kind: CqKind) -> CqStatus {
        self.verdicts[&kind].status
    }
}

fn options(f: &ProblemFile) -> CheckOptions {
    CheckOptions {
        curves: f.curves.clone(),
        ..CheckOptions::default()
    }
}

fn run_matrix() -> Vec<Run> {
    fixtures()
        .into_iter()
        .map(|file| {
            let opts = options(&file);
            let xbar = file.reference.clone().unwrap();
            let verdicts = CqKind::ALL
                .into_iter()
                .map(|k| (k, run_check(&file.problem, &xbar, k, &opts).unwrap()))
                .collect();
            Run { file, verdicts }
        })
        .collect()
}

fn find<'a>(runs: &'a [Run], name: &str) -> &'a Run {
    runs.iter().find(|r| r.file.matches(name)).unwrap()
}

fn expect_status(run: &Run, kind: CqKind, allowed: &[CqStatus]) -> Result<(), String> {
    let got = run.status(kind);
    if allowed.contains(&got) {
        Ok(())
    } else {
        Err(format!("{} {kind} is {got}, expected one of {allowed:?}", run.file.name))
    }
}

fn replayed(run: &Run, kind: CqKind) -> Result<(), String> {
    let w = run.verdicts[&kind].witness.as_ref().ok_or(format!("{kind} has no witness"))?;
    let report = w.replay(&run.file.problem, &Tolerances::default()).map_err(|e| e.to_string())?;
    if report.reproduced() {
        Ok(())
    } else {
        Err(format!("{kind} witness does not replay: {report:?}"))
    }
}

fn no_multiplier(runs: &[Run]) -> Outcome {
    let run = find(runs, "no-multiplier");
    let p = &run.file.problem;
    let mut r = common::rng(1);
    let mut min_stat = kkt_residual(p, &[0.0], &SymMat::zeros(2)).unwrap().stationarity;
    for _ in 0..10_000 {
        let scale = 10f64.powf(r.random_range(-4.0..4.0));
        let y = common::random_psd(&mut r, 2, scale);
        min_stat = min_stat.min(kkt_residual(p, &[0.0], &y).unwrap().stationarity);
    }
    if min_stat < 0.99 {
        return Err(format!("stationarity residual {min_stat} below 0.99"));
    }
    let x0 = run.file.start.clone().unwrap();
    let al = solve_augmented_lagrangian(p, &x0, &AlConfig::default(), 1e-6, 60).unwrap();
    let pen = solve_external_penalty(p, &x0, &PenaltyConfig::default()).unwrap();
    let mut ynorms = Vec::new();
    for t in [&al, &pen] {
        let last = t.last();
        let y = last.akkt.y.frobenius();
        if last.akkt.x[0].abs() > 1e-4 || y < 1e3 {
            return Err(format!("{}: x = {:?}, |Y| = {y:e}", t.solver, last.akkt.x));
        }
        ynorms.push(y);
    }
    expect_status(run, CqKind::WeakCpld, &[CqStatus::Violated])?;
    let w = run.verdicts[&CqKind::WeakCpld].witness.as_ref().unwrap();
    match &w.source {
        WitnessSource::Ray { direction } if direction[0] < 0.0 => {}
        other => return Err(format!("weak-cpld witness source {other:?} is not the x < 0 ray")),
    }
    replayed(run, CqKind::WeakCpld)?;
    Ok(format!(
        "min stationarity {min_stat:.4}; |Y| = {:.1e} (AL), {:.1e} (penalty); weak-cpld VIOLATED on the x < 0 ray",
        ynorms[0], ynorms[1]
    ))
}

fn rank_jump(runs: &[Run]) -> Outcome {
    let run = find(runs, "rank-jump");
    expect_status(run, CqKind::Robinson, &[CqStatus::CertifiedHolds, CqStatus::NoViolationFound])?;
    expect_status(run, CqKind::WeakCpld, &[CqStatus::NoViolationFound])?;
    expect_status(run, CqKind::WeakCrcq, &[CqStatus::Violated])?;
    replayed(run, CqKind::WeakCrcq)?;
    let w = run.verdicts[&CqKind::WeakCrcq].witness.as_ref().unwrap();
    if w.points.is_empty() {
        return Err("witness has no sequence points".into());
    }
    let mut worst = 0.0f64;
    for p in &w.points {
        let targets = [[2.0, 4.0 * p.x[1]], [2.0, 0.0]];
        for t in targets {
            let d = p
                .family
                .iter()
                .map(|v| ((v[0] - t[0]).powi(2) + (v[1] - t[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    if worst > 1e-8 {
        return Err(format!("witness v-vectors off by {worst:e}"));
    }
    Ok(format!(
        "robinson {}, weak-cpld NO_VIOLATION_FOUND, weak-crcq VIOLATED; v-vectors match [2, 4x2] and [2, 0] to {worst:.1e} over {} points",
        run.status(CqKind::Robinson),
        w.points.len()
    ))
}

fn rotating_eigvec(runs: &[Run]) -> Outcome {
    let run = find(runs, "rotating-eigvec");
    expect_status(run, CqKind::WeakCrcq, &[CqStatus::NoViolationFound])?;
    expect_status(run, CqKind::WeakCpld, &[CqStatus::NoViolationFound])?;
    expect_status(run, CqKind::Robinson, &[CqStatus::Violated])?;
    replayed(run, CqKind::Robinson)?;
    Ok("weak-crcq and weak-cpld NO_VIOLATION_FOUND, robinson VIOLATED".into())
}

fn diag_opposite(runs: &[Run]) -> Outcome {
    let run = find(runs, "diag-opposite");
    expect_status(run, CqKind::WeakCrcq, &[CqStatus::NoViolationFound])?;
    expect_status(run, CqKind::WeakCpld, &[CqStatus::NoViolationFound])?;
    let mut worst = 0.0f64;
    for kind in [CqKind::SeqCrcq, CqKind::SeqCpld] {
        expect_status(run, kind, &[CqStatus::Violated])?;
        replayed(run, kind)?;
        let w = run.verdicts[&kind].witness.as_ref().unwrap();
        if !matches!(w.source, WitnessSource::Curve { .. }) {
            return Err(format!("{kind} witness source {:?} is not a registered curve", w.source));
        }
        let slot = w.subset.iter().position(|&i| i == 0).ok_or("subset does not contain the first column")?;
        for p in &w.points {
            if p.delta.is_none() {
                return Err("witness point without a perturbation".into());
            }
            let s = p.x[0] + 1.0;
            worst = worst.max((p.family[slot][0] - (1.0 - s * s)).abs());
        }
    }
    if worst > 1e-10 {
        return Err(format!("v11 differs from 1 - (x+1)^2 by {worst:e}"));
    }
    Ok(format!(
        "weak-crcq/weak-cpld NO_VIOLATION_FOUND, seq-crcq/seq-cpld VIOLATED along a registered curve; v11 = 1 - (x+1)^2 to {worst:.1e}"
    ))
}

fn linear_indefinite(runs: &[Run]) -> Outcome {
    let run = find(runs, "linear-indefinite");
    expect_status(run, CqKind::Robinson, &[CqStatus::Violated])?;
    expect_status(run, CqKind::SeqCrcq, &[CqStatus::NoViolationFound])?;
    let p = &run.file.problem;
    let mut r = common::rng(5);
    for k in 0..64 {
        let x = [r.random_range(-0.1..0.1), r.random_range(-0.1..0.1)];
        let th: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let (c, s) = (th.cos(), th.sin());
        let e = if k % 2 == 0 {
            Mat::from_rows(&[vec![c, -s], vec![s, c]])
        } else {
            Mat::from_rows(&[vec![c, s], vec![s, -c]])
        };
        let fam = v_family_of_columns(p, &x, &e);
        let (v11, v22) = (fam.get(0, 0).unwrap(), fam.get(1, 1).unwrap());
        if v11.iter().zip(v22).any(|(a, b)| *a != -*b) {
            return Err(format!("v11 = {v11:?} but v22 = {v22:?} at x = {x:?}"));
        }
    }
    let start = Instant::now();
    let est = estimate_msr_modulus(p, &[0.0, 0.0], 0.1, 200, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ratios: Vec<f64> = est.samples.iter().filter_map(|s| s.ratio).collect();
    if ratios.len() != 200 || est.gamma_hat < 0.99 || est.gamma_hat > 1.01 {
        return Err(format!("{} ratios, max {}", ratios.len(), est.gamma_hat));
    }
    if elapsed > Duration::from_secs(60) {
        return Err(format!("MSR estimate took {elapsed:?}"));
    }
    Ok(format!(
        "robinson VIOLATED, seq-crcq NO_VIOLATION_FOUND, v11 = -v22 exactly on 64 pairs; MSR max ratio {:.6} over 200 samples in {:.1?}",
        est.gamma_hat, elapsed
    ))
}

fn diagonal_embedding(runs: &[Run]) -> Outcome {
    let mut agree = 0;
    let mut total = 0;
    let mut bad = Vec::new();
    for run in runs {
        let Some(nlp) = &run.file.nlp else { continue };
        total += 1;
        let xbar = run.file.reference.clone().unwrap();
        let opts = options(&run.file);
        let crcq = nlp_constant_rank_check(nlp, &xbar, NlpCq::Crcq, &opts).map_err(|e| e.to_string())?;
        let cpld = nlp_constant_rank_check(nlp, &xbar, NlpCq::Cpld, &opts).map_err(|e| e.to_string())?;
        let pairs = [(CqKind::WeakCrcq, crcq.status), (CqKind::WeakCpld, cpld.status)];
        if pairs.iter().all(|(k, s)| run.status(*k) == *s) {
            agree += 1;
        } else {
            bad.push(run.file.name.clone());
        }
    }
    if total < 5 || agree != total {
        return Err(format!("{agree}/{total} agree; mismatched: {bad:?}"));
    }
    Ok(format!("{agree}/{total} NLP fixtures agree on weak-crcq/CRCQ and weak-cpld/CPLD"))
}

fn property_suites() -> Outcome {
    let suites: [(&str, fn(u64) -> common::CaseResult); 5] = [
        ("moreau", common::moreau_case),
        ("projection", common::projection_case),
        ("caratheodory", common::caratheodory_case),
        ("dependence", common::dependence_case),
        ("al-gradient", common::al_gradient_case),
    ];
    let mut failures = Vec::new();
    for (i, (name, check)) in suites.iter().enumerate() {
        let f = common::run_cases(*check, 10_000 * (i as u64 + 1), 500);
        if let Some((seed, msg)) = f.first() {
            failures.push(format!("{name}: {} failures, first seed {seed}: {msg}", f.len()));
        }
    }
    if failures.is_empty() {
        Ok("5 suites x 500 cases, zero failures".into())
    } else {
        Err(failures.join("; "))
    }
}

fn solver_coherence(runs: &[Run]) -> Outcome {
    let tol = Tolerances::default();
    let mut checked = 0;
    let mut worst_gap = 0.0f64;
    for run in runs {
        let p = &run.file.problem;
        let x0 = run.file.start.clone().unwrap();
        let al = solve_augmented_lagrangian(p, &x0, &AlConfig::default(), 1e-6, 60).map_err(|e| e.to_string())?;
        let sqp = solve_sqp(p, &x0, &SymMat::zeros(p.m()), &SqpConfig::default(), 1e-6, 100).map_err(|e| e.to_string())?;
        for t in [&al, &sqp] {
            if !t.termination.converged() {
                continue;
            }
            let rep = akkt_check(p, &t.certificate(), 1e-4, &tol).map_err(|e| e.to_string())?;
            if !rep.passed {
                return Err(format!("{} {}: akkt_check failed with {:?}", run.file.name, t.solver, rep.failure));
            }
            checked += 1;
        }
        let cfg = AlConfig {
            safeguard: SafeguardPolicy::Zero,
            ..AlConfig::default()
        };
        let zero = solve_augmented_lagrangian(p, &x0, &cfg, 1e-6, 40).map_err(|e| e.to_string())?;
        let pen = solve_external_penalty(p, &x0, &PenaltyConfig::matching(&zero, 1e-6, cfg.inner)).map_err(|e| e.to_string())?;
        if pen.records.len() != zero.records.len() {
            return Err(format!("{}: {} penalty vs {} AL iterates", run.file.name, pen.records.len(), zero.records.len()));
        }
        for (a, b) in zero.records.iter().zip(&pen.records) {
            for (u, v) in a.akkt.x.iter().zip(&b.akkt.x) {
                worst_gap = worst_gap.max((u - v).abs());
            }
        }
    }
    if worst_gap > 1e-12 {
        return Err(format!("zero-safeguard AL and penalty iterates differ by {worst_gap:e}"));
    }
    Ok(format!(
        "{checked} convergent AL/SQP traces pass akkt_check at 1e-4; zero-safeguard AL matches penalty to {worst_gap:.1e}"
    ))
}

fn convergence_under_cq(runs: &[Run]) -> Outcome {
    let tol = Tolerances::default();
    let mut recovered = 0;
    let mut diverged = Vec::new();
    for run in runs {
        let p = &run.file.problem;
        let x0 = run.file.start.clone().unwrap();
        let xbar = run.file.reference.clone().unwrap();
        let al = solve_augmented_lagrangian(p, &x0, &AlConfig::default(), 1e-6, 60).map_err(|e| e.to_string())?;
        let feasible = al.last().residual.feasibility <= 1e-6;
        let rec = recover_multiplier(p, &al.certificate(), &xbar, &RecoveryConfig::default(), &tol).map_err(|e| e.to_string())?;
        let holds = run.status(CqKind::SeqCpld) != CqStatus::Violated;
        if holds && feasible {
            let res = rec.residual.map(|r| r.max()).unwrap_or(f64::INFINITY);
            if rec.status != RecoveryStatus::Recovered || res > 1e-4 {
                return Err(format!("{}: recovery {:?} with residual {res:e}", run.file.name, rec.status));
            }
            recovered += 1;
        }
        if run.status(CqKind::WeakCpld) == CqStatus::Violated && rec.status == RecoveryStatus::Diverged {
            diverged.push(run.file.name.clone());
        }
    }
    if !diverged.iter().any(|n| n == "no-multiplier") {
        return Err("recovery does not report divergence on the no-multiplier fixture".into());
    }
    Ok(format!("{recovered} fixtures recover a KKT multiplier; divergence reported on {diverged:?}"))
}

fn implications(runs: &[Run]) -> Outcome {
    let mut pairs = 0;
    for run in runs {
        let table: Vec<(CqKind, CqStatus)> = run.verdicts.iter().map(|(k, v)| (*k, v.status)).collect();
        let bad = implication_violations(&table);
        if !bad.is_empty() {
            return Err(format!("{}: {bad:?}", run.file.name));
        }
        pairs += table.len();
    }
    Ok(format!("{} fixtures, {pairs} verdicts, no implication violated", runs.len()))
}

fn main() {
    assert!(fixture("ex-3.1").is_some());
    let start = Instant::now();
    let runs = run_matrix();
    eprintln!("fixture matrix computed in {:.1?}", start.elapsed());
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("no-multiplier example", Box::new(|| no_multiplier(&runs))),
        ("rank-jump example", Box::new(|| rank_jump(&runs))),
        ("rotating-eigenvector example", Box::new(|| rotating_eigvec(&runs))),
        ("diag-opposite example", Box::new(|| diag_opposite(&runs))),
        ("linear-indefinite example", Box::new(|| linear_indefinite(&runs))),
        ("diagonal-embedding equivalence", Box::new(|| diagonal_embedding(&runs))),
        ("property suites", Box::new(property_suites)),
        ("solver/AKKT coherence", Box::new(|| solver_coherence(&runs))),
        ("convergence under seq-cpld", Box::new(|| convergence_under_cq(&runs))),
        ("implication order", Box::new(|| implications(&runs))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail} [{:.1?}]", i + 1, t.elapsed()),
            Err(detail) => {
                println!("criterion {:2} FAIL  {name}: {detail} [{:.1?}]", i + 1, t.elapsed());
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria pass", criteria.len());
}
