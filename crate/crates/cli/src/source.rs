use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nsdp::fixtures::{fixture, parse_problem, ProblemFile};

use crate::SourceArgs;

pub fn load(args: &SourceArgs) -> Result<ProblemFile> {
    match (&args.fixture, &args.problem) {
        (Some(name), None) => fixture(name).ok_or_else(|| anyhow!("unknown fixture {name:?}")),
        (None, Some(path)) => load_file(path),
        _ => bail!("give exactly one of --fixture and --problem"),
    }
}

pub fn load_file(path: &Path) -> Result<ProblemFile> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem(&src).map_err(|e| anyhow!("{}:{e}", path.display()))
}

/// Every `*.toml` file of a directory, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<ProblemFile>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_file(p)).collect()
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
