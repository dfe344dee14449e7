mod diagnose;
mod regress;
mod solve;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "nsdp", version, about = "Nonlinear SDP solvers and constraint-qualification diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Built-in fixture name or alias.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Problem file (TOML).
    #[arg(long)]
    pub problem: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Directory for trace, verdict and report files.
    #[arg(long, env = "NSDP_OUT_DIR", default_value = "nsdp-out")]
    pub out_dir: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Penalty,
    Al,
    Sqp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Penalty => "penalty",
            SolverKind::Al => "al",
            SolverKind::Sqp => "sqp",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Fixtures, solvers, implications and property checks.
    Full,
    Fixtures,
    Solvers,
    Properties,
    /// Ratio curve of the linear-indefinite fixture.
    Msr,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver and write its trace.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum, default_value = "al")]
        solver: SolverKind,
        /// TOML file overriding solver settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start point, comma separated; defaults to the file's start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run constraint-qualification checks at a point and write verdicts.
    Diagnose {
        #[command(flatten)]
        source: SourceArgs,
        /// Point, comma separated; defaults to the file's reference point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
        /// Comma separated check names, or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
        /// TOML file with sampling budget overrides.
        #[arg(long)]
        budget: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the regression suite and write a report.
    Regress {
        #[arg(long, value_enum, default_value = "full")]
        suite: Suite,
        /// Load fixtures from this directory instead of the built-in set.
        #[arg(long)]
        fixtures_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Randomized cases per property check.
        #[arg(long, default_value_t = 500)]
        cases: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            source,
            solver,
            config,
            x0,
            out,
        } => solve::run(&source, solver, config.as_deref(), x0, &out.out_dir),
        Command::Diagnose {
            source,
            point,
            checks,
            budget,
            seed,
            out,
        } => diagnose::run(&source, point, &checks, budget.as_deref(), seed, &out.out_dir),
        Command::Regress {
            suite,
            fixtures_dir,
            seed,
            cases,
            out,
        } => regress::run(suite, fixtures_dir.as_deref(), seed, cases, &out.out_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
