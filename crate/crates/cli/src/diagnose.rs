use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use nsdp::cq::{run_check, Budget, CheckOptions, CqKind};
use nsdp::model::NsdpProblem;

use crate::source::{load, write_atomic};
use crate::SourceArgs;

pub fn parse_checks(list: &str) -> Result<Vec<CqKind>> {
    if list.trim() == "all" {
        return Ok(CqKind::ALL.to_vec());
    }
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<CqKind>().map_err(Into::into))
        .collect()
}

pub fn load_budget(path: Option<&Path>) -> Result<Budget> {
    let Some(path) = path else {
        return Ok(Budget::default());
    };
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let b: Budget = toml::from_str(&src).with_context(|| format!("parsing {}", path.display()))?;
    b.validate()?;
    Ok(b)
}

pub fn run(
    source: &SourceArgs,
    point: Option<Vec<f64>>,
    checks: &str,
    budget: Option<&Path>,
    seed: u64,
    out_dir: &Path,
) -> Result<u8> {
    let file = load(source)?;
    let kinds = parse_checks(checks)?;
    let Some(xbar) = point.or_else(|| file.reference.clone()) else {
        bail!("no point: pass --point or add [reference] to the problem file");
    };
    if xbar.len() != file.problem.n() {
        bail!("point has {} entries, problem has {} variables", xbar.len(), file.problem.n());
    }
    let opts = CheckOptions {
        budget: load_budget(budget)?,
        seed,
        curves: file.curves.clone(),
        ..CheckOptions::default()
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let compare = file.reference.as_deref() == Some(xbar.as_slice());
    let mut mismatches = 0;
    let mut rank = None;
    for kind in kinds {
        let v = run_check(&file.problem, &xbar, kind, &opts)?;
        rank = Some(v.rank);
        let path = out_dir.join(format!("{}-{}.verdict.json", file.name, kind.name()));
        let mut json = serde_json::to_vec_pretty(&v)?;
        json.push(b'\n');
        write_atomic(&path, &json)?;
        let expected = compare.then(|| file.expected.get(&kind)).flatten();
        let tag = match expected {
            Some(e) if *e == v.status => format!("  (expected {e})"),
            Some(e) => {
                mismatches += 1;
                format!("  MISMATCH: expected {e}")
            }
            None => String::new(),
        };
        println!("{:20} {:20}{tag}", kind.name(), v.status.name());
    }
    if let Some(r) = rank {
        println!("rank {r} of m = {}; verdicts in {}", file.problem.m(), out_dir.display());
    }
    Ok(if mismatches > 0 { 1 } else { 0 })
}
