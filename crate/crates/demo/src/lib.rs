//! Browser bindings: rank-2 comparison curves, a pure-pair prior scan and a measurement
//! realization, each returned as a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use udisc_core::bounds::RankTwoAngles;
use udisc_core::fixtures::pure_pair;
use udisc_core::sdp::{solve_states, SolveOptions};
use udisc_core::sweep::{eta_grid, scan, table1};
use udisc_core::synthesis::{extract_povm, realize, verify_outputs};
use udisc_core::UDProblem;

type Out = Result<String, String>;

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct Curves {
    boundaries: [f64; 4],
    ra: [f64; 2],
    rows: Vec<udisc_core::sweep::Table1Row>,
}

pub fn table1_curves_json(cos1: f64, cos2: f64, grid: usize, with_sdp: bool) -> Out {
    let angles = RankTwoAngles::from_cosines(cos1, cos2).map_err(|e| e.to_string())?;
    let opts = SolveOptions::default();
    let rows = table1(angles, grid, with_sdp.then_some(&opts)).map_err(|e| e.to_string())?;
    to_json(&Curves {
        boundaries: angles.boundaries(),
        ra: [angles.ra1(), angles.ra2()],
        rows,
    })
}

pub fn pure_scan_json(overlap: f64, points: usize) -> Out {
    let (a, b) = pure_pair(overlap).map_err(|e| e.to_string())?;
    let rep =
        scan(&a, &b, &eta_grid(points), &SolveOptions::default()).map_err(|e| e.to_string())?;
    to_json(&rep)
}

#[derive(Serialize)]
struct RealizationSummary {
    p_star: f64,
    output_dim: usize,
    ancilla_dim: usize,
    /// `Tr(E_k rho_l)` for the conclusive outcomes.
    detection: Vec<Vec<f64>>,
    /// Diagonal of each POVM element in the input basis, `E_0` first.
    povm_diagonals: Vec<Vec<f64>>,
    povm_success: f64,
    completeness_residual: f64,
    unitarity_residual: f64,
    max_cross_overlap: f64,
    pass: bool,
}

pub fn realize_pure_pair_json(overlap: f64, eta1: f64) -> Out {
    let (a, b) = pure_pair(overlap).map_err(|e| e.to_string())?;
    let problem = UDProblem::new(vec![a, b], vec![eta1, 1.0 - eta1]).map_err(|e| e.to_string())?;
    let ens = problem.spectral_ensembles().map_err(|e| e.to_string())?;
    let (sdp, sol) = solve_states(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let real = realize(sdp.x(), &sol.y, &ens).map_err(|e| e.to_string())?;
    let report = verify_outputs(&real);
    let povm = extract_povm(&real).map_err(|e| e.to_string())?;
    to_json(&RealizationSummary {
        p_star: sol.p_star,
        output_dim: real.output_dim(),
        ancilla_dim: real.ancilla_dim,
        detection: povm.detection_matrix(problem.states()),
        povm_diagonals: povm
            .elements
            .iter()
            .map(|e| (0..e.rows()).map(|i| e[(i, i)].re).collect())
            .collect(),
        povm_success: povm.success_probability(problem.states(), problem.priors()),
        completeness_residual: povm.completeness_residual(),
        unitarity_residual: report.unitarity_residual,
        max_cross_overlap: report.max_cross_overlap,
        pass: report.pass,
    })
}

/// Rows of the comparison table for the rank-2 family.
#[wasm_bindgen]
pub fn table1_curves(cos1: f64, cos2: f64, grid: usize, with_sdp: bool) -> Result<String, JsValue> {
    js(table1_curves_json(cos1, cos2, grid, with_sdp))
}

/// Optimum and bound of the pure pair with overlap `c` over a grid of priors.
#[wasm_bindgen]
pub fn pure_scan(overlap: f64, points: usize) -> Result<String, JsValue> {
    js(pure_scan_json(overlap, points))
}

#[wasm_bindgen]
pub fn realize_pure_pair(overlap: f64, eta1: f64) -> Result<String, JsValue> {
    js(realize_pure_pair_json(overlap, eta1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Out) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn curves_have_requested_rows() {
        let v = parse(table1_curves_json(0.4, 0.6, 20, false));
        assert_eq!(v["rows"].as_array().unwrap().len(), 20);
        assert!(v["rows"][0]["p_sdp"].is_null());
        let v = parse(table1_curves_json(0.4, 0.6, 5, true));
        for r in v["rows"].as_array().unwrap() {
            let d = r["p_sdp"].as_f64().unwrap() - r["p"].as_f64().unwrap();
            assert!(d.abs() < 1e-6);
        }
        assert!(table1_curves_json(0.7, 0.6, 10, false).is_err());
    }

    #[test]
    fn pure_scan_has_three_intervals() {
        let v = parse(pure_scan_json(0.5, 7));
        assert_eq!(v["intervals"], 3);
        assert_eq!(v["rows"].as_array().unwrap().len(), 7);
    }

    #[test]
    fn realization_matches_optimum() {
        let v = parse(realize_pure_pair_json(0.5, 0.5));
        assert_eq!(v["pass"], true);
        assert!((v["p_star"].as_f64().unwrap() - 0.5).abs() < 1e-7);
        let det = v["detection"].as_array().unwrap();
        assert_eq!(det.len(), 2);
        assert!(det[0][1].as_f64().unwrap().abs() < 1e-8);
        assert!(det[1][0].as_f64().unwrap().abs() < 1e-8);
        assert!(realize_pure_pair_json(0.5, 1.5).is_err());
    }
}
