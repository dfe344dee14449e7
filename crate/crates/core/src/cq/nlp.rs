//! Classical CRCQ and CPLD for `g_i(x) >= 0`, sampled along rays.

use serde::{Deserialize, Serialize};

use super::sampling::{random_unit, sample_rng, subsets};
use super::witness::Dependence;
use super::{CheckOptions, CqError, CqStatus, WitnessCurve};
use crate::kkt::dg_scale;
use crate::linalg::lin_dependent_scaled;
use crate::model::{DiagonalEmbedding, NsdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpCq {
    /// Every subset of active gradients that is linearly dependent at `x̄`
    /// stays dependent nearby.
    Crcq,
    /// Every positively dependent subset stays linearly dependent nearby.
    Cpld,
}

/// Result of the NLP-side sampler: a violating active subset (indices into
/// the constraint list) and ray, if one was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpVerdict {
    pub status: CqStatus,
    pub active: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

/// Samples rays `x̄ + t_k d` (registered, `±` coordinate, random) and looks
/// for an active subset whose gradients are dependent at `x̄` but linearly
/// independent on the deepest levels.
pub fn nlp_constant_rank_check(
    nlp: &DiagonalEmbedding,
    xbar: &[f64],
    kind: NlpCq,
    opts: &CheckOptions,
) -> Result<NlpVerdict, CqError> {
    opts.budget.validate()?;
    let n = nlp.n();
    if xbar.len() != n {
        return Err(CqError::Dimension(format!("point has {} entries, problem has {n} variables", xbar.len())));
    }
    let values = nlp.values(xbar);
    let scale_g = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if let Some(v) = values.iter().copied().find(|v| *v < -opts.tol.psd_for(scale_g)) {
        return Err(CqError::Infeasible {
            lambda_min: v,
            tolerance: opts.tol.psd_for(scale_g),
        });
    }
    let active: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].abs() <= opts.tol.rank * scale_g)
        .collect();
    let mut verdict = NlpVerdict {
        status: CqStatus::NoViolationFound,
        active: active.clone(),
        subset: None,
        direction: None,
    };
    if active.is_empty() {
        verdict.status = CqStatus::CertifiedHolds;
        return Ok(verdict);
    }
    if active.len() > 12 {
        return Err(CqError::TooManySmallEigenvalues(active.len()));
    }
    let test = match kind {
        NlpCq::Crcq => Dependence::Linear,
        NlpCq::Cpld => Dependence::Positive,
    };
    let scale = dg_scale(nlp, xbar);
    let grads_bar = nlp.grads(xbar);
    let pick = |grads: &[Vec<f64>], j: &[usize]| -> Vec<Vec<f64>> { j.iter().map(|&i| grads[active[i]].clone()).collect() };
    let dependent_subsets: Vec<Vec<usize>> = subsets(active.len())
        .into_iter()
        .filter(|j| test.holds(&pick(&grads_bar, j), scale, &opts.tol))
        .collect();
    if dependent_subsets.is_empty() {
        return Ok(verdict);
    }
    let mut dirs: Vec<Vec<f64>> = opts
        .curves
        .iter()
        .filter_map(|c| match c {
            WitnessCurve::Ray { direction } if direction.len() == n => Some(direction.clone()),
            _ => None,
        })
        .collect();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            dirs.push(d);
        }
    }
    for j in 0..opts.budget.directions {
        let mut rng = sample_rng(opts.seed, 20, j as u64);
        dirs.push(random_unit(&mut rng, n));
    }
    let levels = opts.budget.levels;
    for d in dirs {
        let deep: Vec<Vec<Vec<f64>>> = (levels - opts.budget.stable_levels..levels)
            .map(|s| {
                let t = opts.budget.level_t(s);
                let x: Vec<f64> = xbar.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                nlp.grads(&x)
            })
            .collect();
        for j in &dependent_subsets {
            if deep.iter().all(|g| !lin_dependent_scaled(&pick(g, j), scale, &opts.tol)) {
                verdict.status = CqStatus::Violated;
                verdict.subset = Some(j.iter().map(|&i| active[i]).collect());
                verdict.direction = Some(d);
                return Ok(verdict);
            }
        }
    }
    Ok(verdict)
}
