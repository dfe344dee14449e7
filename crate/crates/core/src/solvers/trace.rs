use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::inner::InnerStats;
use crate::kkt::{AkktCertificate, KktResidual, TraceRecord};
use crate::linalg::SymMat;

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The largest KKT residual reached the target tolerance.
    TargetReached,
    /// The SQP step fell below the target tolerance.
    StepBelowTolerance,
    MaxOuter,
    /// `||x||` exceeded the configured radius.
    Unbounded,
    LineSearchFailed,
    SubproblemInfeasible,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::TargetReached | Termination::StepBelowTolerance)
    }
}

/// SQP line-search data of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub d_norm: f64,
    pub alpha: f64,
    pub halvings: usize,
    /// Largest KKT residual of the linearized subproblem solve.
    pub subproblem_residual: f64,
}

/// One solver iteration. The flattened fields form a [`TraceRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    #[serde(flatten)]
    pub akkt: TraceRecord,
    /// Safeguarded multiplier used in the subproblem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ytilde: Option<SymMat>,
    /// `||V^k||_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_norm: Option<f64>,
    /// Whether the penalty parameter was kept for the next iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_kept: Option<bool>,
    /// Inner stationarity tolerance `ε_k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepInfo>,
    pub residual: KktResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub solver: String,
    pub records: Vec<IterRecord>,
    pub termination: Termination,
}

impl SolverTrace {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("traces hold at least one record")
    }

    pub fn certificate(&self) -> AkktCertificate {
        AkktCertificate {
            records: self.records.iter().map(|r| r.akkt.clone()).collect(),
        }
    }

    /// Writes one JSON object per record followed by a footer line
    /// `{"termination": ...}`.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        serde_json::to_writer(
            &mut w,
            &serde_json::json!({ "solver": self.solver, "termination": self.termination }),
        )?;
        writeln!(w)
    }
}

/// Reads the records of a trace file, ignoring footer lines and solver
/// specific fields.
pub fn read_certificate(r: impl BufRead) -> Result<AkktCertificate, serde_json::Error> {
    let mut records = Vec::new();
    for line in r.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(trimmed)?;
        if value.get("termination").is_some() {
            continue;
        }
        records.push(serde_json::from_value(value)?);
    }
    Ok(AkktCertificate { records })
}
