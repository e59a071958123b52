//! Browser bindings: background profile, threshold bisection and a
//! perturbation solve. Every entry point takes and returns JSON text.

use epnozzle::{
    find_threshold_e, fixed_point_solve, integrate_background, make_bump_boundary_data, BumpAmplitudes,
    FixedPointConfig, GasParams, Grid2D, InletState, NozzleGeometry,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Problem {
    pub gas: GasParams,
    pub geometry: NozzleGeometry,
    pub inlet: InletState,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BackgroundView {
    pub r: Vec<f64>,
    pub msq: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub e: Vec<f64>,
    pub lemma_condition: bool,
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ThresholdQuery {
    #[serde(flatten)]
    pub problem: Problem,
    pub bracket: (f64, f64),
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdView {
    pub e_star: f64,
    pub lo: f64,
    pub hi: f64,
    pub failure: String,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct PerturbationQuery {
    #[serde(flatten)]
    pub problem: Problem,
    pub amplitude: f64,
    pub nr: usize,
    pub nt: usize,
}

/// Perturbation fields in row-major order, `index = i nt + j`.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationView {
    pub nr: usize,
    pub nt: usize,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<f64>,
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub sigma_p: f64,
    pub norm: f64,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub converged: bool,
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn emit<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn background_json(query: &str) -> Result<String, String> {
    let p: Problem = parse(query)?;
    let bg = integrate_background(p.gas, p.geometry, p.inlet, p.nodes).map_err(|e| e.to_string())?;
    emit(&BackgroundView {
        lemma_condition: epnozzle::check_lemma_condition(&p.gas, &p.geometry),
        strictly_decreasing: bg.is_strictly_decreasing_mach(),
        r: bg.r,
        msq: bg.msq,
        rho: bg.rho,
        u: bg.u,
        phi: bg.phi,
        e: bg.e,
    })
}

pub fn threshold_json(query: &str) -> Result<String, String> {
    let q: ThresholdQuery = parse(query)?;
    let p = q.problem;
    let r = find_threshold_e(p.gas, p.geometry, p.inlet, q.bracket, q.tol, p.nodes).map_err(|e| e.to_string())?;
    emit(&ThresholdView {
        e_star: r.e_star,
        lo: r.lo,
        hi: r.hi,
        failure: format!("{:?}", r.failure),
        evaluations: r.evaluations,
    })
}

pub fn perturbation_json(query: &str) -> Result<String, String> {
    let q: PerturbationQuery = parse(query)?;
    let p = q.problem;
    let err = |e: epnozzle::Error| e.to_string();
    let bg = integrate_background(p.gas, p.geometry, p.inlet, p.nodes).map_err(err)?;
    let grid = Grid2D::new(q.nr, q.nt, p.geometry).map_err(err)?;
    let bd = make_bump_boundary_data(&BumpAmplitudes::uniform(q.amplitude), &bg, &grid);
    let (v, rep) = fixed_point_solve(&bd, &bg, &grid, &FixedPointConfig::default()).map_err(err)?;
    emit(&PerturbationView {
        nr: grid.nr,
        nt: grid.nt,
        r: grid.radii(),
        theta: grid.thetas(),
        norm: v.norm(&grid),
        u: v.u.data,
        v: v.v.data,
        phi: v.phi.data,
        s: v.s.data,
        k: v.k.data,
        sigma_p: rep.sigma_p,
        iterations: rep.iterations,
        increments: rep.increments,
        converged: rep.converged,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Background profiles for `{gas, geometry, inlet, nodes}`.
#[wasm_bindgen]
pub fn background(query: &str) -> Result<String, JsError> {
    js(background_json(query))
}

/// Critical entrance field; adds `bracket` and `tol` to the problem.
#[wasm_bindgen]
pub fn threshold(query: &str) -> Result<String, JsError> {
    js(threshold_json(query))
}

/// Converged perturbation for uniform bump data of size `amplitude` on an
/// `nr x nt` grid.
#[wasm_bindgen]
pub fn perturbation(query: &str) -> Result<String, JsError> {
    js(perturbation_json(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};

    fn problem() -> Value {
        json!({
            "gas": { "gamma": 2.0, "b0": 1.0 },
            "geometry": { "r1": 1.0, "r2": 2.0, "theta0": 0.5 },
            "inlet": { "rho0": 1.0, "u0": 0.5, "p0": 1.0, "e0": -3.0 },
            "nodes": 401
        })
    }

    #[test]
    fn background_view_has_all_nodes() {
        let out: Value = serde_json::from_str(&background_json(&problem().to_string()).unwrap()).unwrap();
        assert_eq!(out["r"].as_array().unwrap().len(), 401);
        assert_eq!(out["msq"][0].as_f64(), Some(0.125));
        assert_eq!(out["lemma_condition"], json!(true));
    }

    #[test]
    fn threshold_view_brackets_the_estimate() {
        let mut q = problem();
        q["bracket"] = json!([-3.0, 0.5]);
        q["tol"] = json!(1e-4);
        let out: Value = serde_json::from_str(&threshold_json(&q.to_string()).unwrap()).unwrap();
        let (lo, hi) = (out["lo"].as_f64().unwrap(), out["hi"].as_f64().unwrap());
        assert!(lo < hi && hi - lo <= 1e-4);
        assert!((-1.1..-0.9).contains(&out["e_star"].as_f64().unwrap()));
    }

    #[test]
    fn perturbation_view_is_row_major() {
        let mut q = problem();
        q["amplitude"] = json!(2.5e-4);
        q["nr"] = json!(11);
        q["nt"] = json!(9);
        let out: Value = serde_json::from_str(&perturbation_json(&q.to_string()).unwrap()).unwrap();
        assert_eq!(out["v"].as_array().unwrap().len(), 99);
        assert_eq!(out["converged"], json!(true));
        // V vanishes on the walls
        assert_eq!(out["v"][0].as_f64(), Some(0.0));
        assert_eq!(out["v"][8].as_f64(), Some(0.0));
    }

    #[test]
    fn errors_are_reported_as_text() {
        assert!(background_json("{").is_err());
        let mut p = problem();
        p["inlet"]["e0"] = json!(0.5);
        assert!(background_json(&p.to_string()).unwrap_err().contains("subsonic"));
    }
}
