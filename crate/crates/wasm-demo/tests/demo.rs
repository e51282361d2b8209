use serde_json::Value;
use wml_wasm_demo::*;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn lists_surface_scenarios() {
    let v = parse(&scenarios_json());
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["disk_linear", "annulus_linear", "disk_saddle", "disk_interior_min"]);
}

#[test]
fn mesh_carries_critical_points() {
    let v = parse(&mesh_json("disk_saddle", 0.2).unwrap());
    let crit = v["critical"].as_array().unwrap();
    assert_eq!(crit.len(), 5);
    assert_eq!(crit.iter().filter(|p| p["generator"] == true).count(), 3);
    let nv = v["vertices"].as_array().unwrap().len();
    assert!(v["triangles"].as_array().unwrap().iter().flat_map(|t| t.as_array().unwrap()).all(|i| (i.as_u64().unwrap() as usize) < nv));
    assert!(!v["boundary_edges"].as_array().unwrap().is_empty());
}

#[test]
fn spectrum_counts_match_expected() {
    let v = parse(&spectrum_json("disk_linear", "absolute", 8.0, 0.1).unwrap());
    assert_eq!(v["counts"], serde_json::json!([1, 0, 0]));
    assert_eq!(v["counts"], v["expected"]);
    assert_eq!(v["eigenvalues"][1].as_array().unwrap().len(), 4);
}

#[test]
fn complex_of_the_saddle() {
    let v = parse(&complex_json("disk_saddle", "absolute").unwrap());
    assert_eq!(v["betti"], serde_json::json!([1, 0, 0]));
    assert_eq!(v["generators"][0].as_array().unwrap().len(), 2);
    assert_eq!(v["equality_at_top"], true);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(mesh_json("interval_robin", 0.1).is_err());
    assert!(mesh_json("nowhere", 0.1).is_err());
    assert!(spectrum_json("disk_linear", "mixed", 4.0, 0.1).is_err());
    assert!(spectrum_json("disk_linear", "absolute", 100.0, 0.1).is_err());
    assert!(spectrum_json("disk_linear", "absolute", f64::NAN, 0.1).is_err());
}
