//! Three small operations exposed to JavaScript. Each returns a JSON string;
//! errors become a JavaScript exception carrying the message.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nsdp::cq::{estimate_msr_modulus, v_family_of_columns, CheckOptions};
use nsdp::fixtures::fixture;
use nsdp::model::NsdpProblem;
use nsdp::linalg::{moreau_split, pos_lin_dependent, spectral_decompose, Mat, SymMat, Tolerances};

#[derive(Serialize)]
struct Split {
    eigenvalues: Vec<f64>,
    plus: Vec<Vec<f64>>,
    minus: Vec<Vec<f64>>,
    /// `<M+, M->`, zero up to rounding.
    inner: f64,
}

/// Moreau split `M = M+ - M-`, both parts PSD, of the symmetric matrix given
/// by its rows.
pub fn split_json(rows: &str) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows).map_err(|e| format!("bad matrix: {e}"))?;
    let m = SymMat::from_rows(&rows).map_err(|e| e.to_string())?;
    let d = spectral_decompose(&m).map_err(|e| e.to_string())?;
    let (plus, minus) = moreau_split(&m).map_err(|e| e.to_string())?;
    let out = Split {
        eigenvalues: d.values,
        inner: plus.inner(&minus),
        plus: plus.to_rows(),
        minus: minus.to_rows(),
    };
    Ok(serde_json::to_string(&out).unwrap())
}

#[derive(Serialize)]
struct Angle {
    theta: f64,
    basis: Vec<Vec<f64>>,
    v11: Vec<f64>,
    v22: Vec<f64>,
    v12: Vec<f64>,
    /// `{v11, v22}` is positively linearly dependent.
    diagonal_pos_dependent: bool,
}

/// v-vectors of a two-variable fixture at its reference point, computed in
/// the orthonormal basis of `R^2` rotated by `theta`.
pub fn v_family_json(name: &str, theta: f64) -> Result<String, String> {
    let file = fixture(name).ok_or_else(|| format!("unknown fixture {name:?}"))?;
    if file.problem.m() != 2 {
        return Err(format!("{name} has m = {}, the demo needs m = 2", file.problem.m()));
    }
    let xbar = file.reference.clone().ok_or("fixture has no reference point")?;
    let (c, s) = (theta.cos(), theta.sin());
    let basis = Mat::from_columns(2, &[vec![c, s], vec![-s, c]]);
    let fam = v_family_of_columns(&file.problem, &xbar, &basis);
    let diag = fam.diagonal();
    let out = Angle {
        theta,
        basis: basis.to_rows(),
        v11: fam.get(0, 0).unwrap().to_vec(),
        v22: fam.get(1, 1).unwrap().to_vec(),
        v12: fam.get(0, 1).unwrap().to_vec(),
        diagonal_pos_dependent: pos_lin_dependent(&diag, &Tolerances::default()),
    };
    Ok(serde_json::to_string(&out).unwrap())
}

#[derive(Serialize)]
struct Curve {
    radius: f64,
    gamma_hat: f64,
    growth: f64,
    /// `(||x - x̄||, ratio)` for every sample with a ratio.
    points: Vec<(f64, f64)>,
}

/// Sampled ratios `dist(x, F) / ||Π(-G(x))||` around a fixture's reference point.
pub fn msr_curve_json(name: &str, radius: f64, samples: usize, seed: u64) -> Result<String, String> {
    let file = fixture(name).ok_or_else(|| format!("unknown fixture {name:?}"))?;
    let xbar = file.reference.clone().ok_or("fixture has no reference point")?;
    let opts = CheckOptions {
        seed,
        ..CheckOptions::default()
    };
    let est = estimate_msr_modulus(&file.problem, &xbar, radius, samples, &opts).map_err(|e| e.to_string())?;
    let points = est
        .samples
        .iter()
        .filter_map(|s| {
            let d = s.x.iter().zip(&xbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            s.ratio.map(|r| (d, r))
        })
        .collect();
    let out = Curve {
        radius,
        gamma_hat: est.gamma_hat,
        growth: est.growth(),
        points,
    };
    Ok(serde_json::to_string(&out).unwrap())
}

#[wasm_bindgen]
pub fn moreau(rows: &str) -> Result<String, JsError> {
    split_json(rows).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn v_family_at(name: &str, theta: f64) -> Result<String, JsError> {
    v_family_json(name, theta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn msr_curve(name: &str, radius: f64, samples: usize, seed: u64) -> Result<String, JsError> {
    msr_curve_json(name, radius, samples, seed).map_err(|e| JsError::new(&e))
}
