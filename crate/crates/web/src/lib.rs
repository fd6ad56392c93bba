//! Browser bindings for three besovlab experiments.
//!
//! Each export returns a JSON document; the `*_json` functions hold the
//! logic and run natively as well.

use std::f64::consts::TAU;

use besovlab::dyadic::DyadicLadder;
use besovlab::elliptic::{potential, solve_pressure};
use besovlab::lab::{
    check_elliptic_estimate, check_heat_decay, default_heat_times, gaussian_field,
    gaussian_vector, random_coefficient, GaussianEnsemble, LabSetup, HEAT_WINDOW,
};
use besovlab::norms::{block_profile, BesovSpec};
use besovlab::spectral::Grid;
use besovlab::Result;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 256;

fn grid(n: usize) -> Result<Grid> {
    if n > MAX_N {
        return Err(besovlab::Error::Invalid(format!("n = {n} exceeds {MAX_N}")));
    }
    Grid::new(n, TAU)
}

/// Random field, its dyadic blocks and the weighted profile `2^{js} |Δ̇_j u|_p`.
pub fn blocks_json(n: usize, slope: f64, seed: u32, p: f64, s: f64) -> Result<String> {
    let g = grid(n)?;
    let ladder = DyadicLadder::new(&g)?;
    let u = gaussian_field(&g, &GaussianEnsemble::broadband(&g, slope), seed as u64).without_mean();
    let spec = BesovSpec::homogeneous(s, p, 1.0)?;
    let profile = block_profile(&u, &spec, &ladder)?;
    let blocks: Vec<_> = ladder
        .blocks(&u)?
        .into_iter()
        .zip(profile.entries())
        .map(|((j, b), (_, w))| json!({ "j": j, "weighted": w, "field": b.to_physical() }))
        .collect();
    Ok(json!({
        "n": n,
        "field": u.to_physical(),
        "blocks": blocks,
        "norm": profile.aggregate(1.0),
    })
    .to_string())
}

/// Solves `div((1 + a) grad Pi) = div F` for random data and measures the pressure bounds.
pub fn pressure_json(n: usize, amplitude: f64, seed: u32, p: f64) -> Result<String> {
    let setup = LabSetup::new(grid(n)?.n(), TAU, seed as u64)?;
    let g = &setup.grid;
    let a = random_coefficient(g, setup.seed, amplitude)?;
    let f = gaussian_vector(g, &GaussianEnsemble::broadband(g, 1.5), setup.seed ^ 0xf0);
    let (grad_pi, stats) = solve_pressure(&a, &f, 1e-10, 4000)?;
    let est = check_elliptic_estimate(&a, &f, &grad_pi, p, &setup.ladder)?;
    Ok(json!({
        "n": n,
        "a": a.to_physical(),
        "pi": potential(&grad_pi)?.to_physical(),
        "iterations": stats.iterations,
        "residual": stats.residual,
        "estimate": est,
    })
    .to_string())
}

/// Heat decay of annulus data at scale `2^j` with the fitted constants.
pub fn heat_json(j: i32, p: f64, seed: u32, trials: usize) -> Result<String> {
    let setup = LabSetup::new(64, TAU, seed as u64)?;
    let times = default_heat_times(j);
    let r = check_heat_decay(&setup, j, &times, p, trials.max(1))?;
    let lambda2 = 4f64.powi(j);
    let curves: Vec<Vec<f64>> = r
        .report
        .rows
        .chunks(times.len())
        .map(|rows| rows.iter().map(|row| row.lhs / rows[0].lhs).collect())
        .collect();
    Ok(json!({
        "j": j,
        "scaled_times": times.iter().map(|t| t * lambda2).collect::<Vec<_>>(),
        "curves": curves,
        "fits": r.fits,
        "window": [HEAT_WINDOW.0, HEAT_WINDOW.1],
        "all_in_window": r.all_in_window(),
    })
    .to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn blocks(n: usize, slope: f64, seed: u32, p: f64, s: f64) -> std::result::Result<String, JsError> {
    js(blocks_json(n, slope, seed, p, s))
}

#[wasm_bindgen]
pub fn pressure(n: usize, amplitude: f64, seed: u32, p: f64) -> std::result::Result<String, JsError> {
    js(pressure_json(n, amplitude, seed, p))
}

#[wasm_bindgen]
pub fn heat(j: i32, p: f64, seed: u32, trials: usize) -> std::result::Result<String, JsError> {
    js(heat_json(j, p, seed, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn blocks_sum_to_field() {
        let v: Value = serde_json::from_str(&blocks_json(32, 1.0, 3, 2.0, 0.0).unwrap()).unwrap();
        let field: Vec<f64> = serde_json::from_value(v["field"].clone()).unwrap();
        let mut sum = vec![0.0; field.len()];
        for b in v["blocks"].as_array().unwrap() {
            let f: Vec<f64> = serde_json::from_value(b["field"].clone()).unwrap();
            sum.iter_mut().zip(f).for_each(|(s, x)| *s += x);
        }
        let err = sum.iter().zip(&field).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn pressure_reports_l2_bound() {
        let v: Value = serde_json::from_str(&pressure_json(32, 0.5, 1, 2.0).unwrap()).unwrap();
        assert!(v["estimate"]["l2_ratio"].as_f64().unwrap() <= 1.0 + 1e-6);
        assert_eq!(v["pi"].as_array().unwrap().len(), 32 * 32);
    }

    #[test]
    fn heat_fits_in_window() {
        let v: Value = serde_json::from_str(&heat_json(3, 2.0, 2, 4).unwrap()).unwrap();
        assert!(v["all_in_window"].as_bool().unwrap());
        assert_eq!(v["curves"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn rejects_oversized_grids() {
        assert!(blocks_json(512, 1.0, 1, 2.0, 0.0).is_err());
    }
}
