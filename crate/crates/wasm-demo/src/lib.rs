//! WebAssembly bindings for the browser demo. Each operation returns a JSON
//! string; the `*_json` functions are plain Rust so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use wml_core::cli::{find_scenario, registry, Scenario};
use wml_core::dec::{assemble, BoundaryCondition};
use wml_core::morse::{homology_ranks, morse_complex, morse_inequalities, CriticalPoint};
use wml_core::spectral::{check_resolution, count_below, solve_entry};

/// Threshold separating the low cluster from the rest of the spectrum.
const C0: f64 = 1.0;
/// Eigenvalues computed per degree.
const PAIRS: usize = 4;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn surface(name: &str) -> Result<Scenario, String> {
    let s = find_scenario(name).map_err(err)?;
    if !s.is_surface() {
        return Err(format!("'{name}' is not a surface scenario"));
    }
    Ok(s)
}

fn parse_bc(bc: &str) -> Result<BoundaryCondition, String> {
    match bc {
        "absolute" => Ok(BoundaryCondition::Absolute),
        "relative" => Ok(BoundaryCondition::Relative),
        _ => Err(format!("boundary condition must be 'absolute' or 'relative', got '{bc}'")),
    }
}

fn point_json(p: &CriticalPoint) -> Value {
    json!({
        "x": p.location[0],
        "y": p.location[1],
        "index": p.index,
        "kind": format!("{:?}", p.kind),
        "generator": p.is_generator(),
        "f": p.f_value,
    })
}

/// Surface scenarios with their domain and function descriptions.
pub fn scenarios_json() -> String {
    let list: Vec<Value> = registry()
        .into_iter()
        .filter(|s| s.is_surface())
        .map(|s| json!({ "name": s.name, "domain": s.domain, "f": s.f }))
        .collect();
    Value::Array(list).to_string()
}

/// Mesh and critical points of a scenario.
pub fn mesh_json(name: &str, h: f64) -> Result<String, String> {
    let s = surface(name)?;
    let mesh = s.mesh(h).map_err(err)?;
    let points = s.critical_points().map_err(err)?;
    Ok(json!({
        "h": mesh.h,
        "vertices": mesh.vertices,
        "triangles": mesh.triangles,
        "boundary_edges": mesh.edges.iter().zip(&mesh.boundary_edge).filter(|(_, b)| **b).map(|(e, _)| e).collect::<Vec<_>>(),
        "critical": points.iter().map(point_json).collect::<Vec<_>>(),
    })
    .to_string())
}

/// Lowest Witten Laplacian eigenvalues in each degree at one T, with the
/// number below C0 and the count predicted by the critical points.
pub fn spectrum_json(name: &str, bc: &str, t: f64, h: f64) -> Result<String, String> {
    let s = surface(name)?;
    let bc = parse_bc(bc)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(format!("T must be a finite nonnegative number, got {t}"));
    }
    let mesh = s.mesh(h).map_err(err)?;
    check_resolution(mesh.h, t).map_err(err)?;
    let asm = assemble(&mesh, &s.morse_function().map_err(err)?, bc).map_err(err)?;
    let mut eigenvalues = Vec::new();
    let mut counts = Vec::new();
    for j in 0..3 {
        let e = solve_entry(&asm, t, j, PAIRS, 1e-9, 0).map_err(err)?;
        counts.push(count_below(&e, C0).map_err(err)?);
        eigenvalues.push(e.eigenvalues);
    }
    Ok(json!({
        "T": t,
        "h": mesh.h,
        "C0": C0,
        "eigenvalues": eigenvalues,
        "counts": counts,
        "expected": s.expected(bc),
    })
    .to_string())
}

/// Thom-Smale complex: generators, boundary matrices, homology and the
/// strong Morse inequalities.
pub fn complex_json(name: &str, bc: &str) -> Result<String, String> {
    let s = surface(name)?;
    let bc = parse_bc(bc)?;
    let f = s.morse_function().map_err(err)?;
    let d = morse_complex(&f, &s.surface_domain().map_err(err)?, bc, &s.complex_settings()).map_err(err)?;
    let h = homology_ranks(&d.complex);
    let ineq = morse_inequalities(&d.counts, h.betti, bc);
    let gens: Vec<Vec<Value>> = d.complex.generators.iter().map(|g| g.iter().map(point_json).collect()).collect();
    Ok(json!({
        "generators": gens,
        "boundary": d.complex.boundary,
        "betti": h.betti,
        "inequalities": ineq.rows,
        "equality_at_top": ineq.equality_at_top,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn scenarios() -> String {
    scenarios_json()
}

#[wasm_bindgen]
pub fn mesh(name: &str, h: f64) -> Result<String, JsError> {
    mesh_json(name, h).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectrum(name: &str, bc: &str, t: f64, h: f64) -> Result<String, JsError> {
    spectrum_json(name, bc, t, h).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn complex(name: &str, bc: &str) -> Result<String, JsError> {
    complex_json(name, bc).map_err(|e| JsError::new(&e))
}
