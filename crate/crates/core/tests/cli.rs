use std::process::Command;

use wml_core::cli::*;
use wml_core::dec::BoundaryCondition;

fn config(scenario: &str, bc: BoundaryCondition, t: &[f64], h: f64) -> RunConfig {
    RunConfig { scenario: scenario.into(), bc, t_list: t.to_vec(), h, ..Default::default() }
}

fn check<'a>(r: &'a RunReport, name: &str) -> &'a Check {
    r.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn registry_lists_shipped_scenarios_in_order() {
    let names: Vec<String> = list_scenarios("").into_iter().map(|s| s.name).collect();
    assert_eq!(names, ["disk_linear", "annulus_linear", "disk_saddle", "disk_interior_min", "interval_robin"]);
    assert!(list_scenarios("no_such_scenario").is_empty());
    assert_eq!(list_scenarios("disk").len(), 3);
}

#[test]
fn registry_counts_match_the_critical_points() {
    for s in registry().into_iter().filter(|s| s.is_surface()) {
        let counts = wml_core::morse::morse_counts(&s.critical_points().unwrap());
        assert_eq!(s.expected_absolute, Some(counts.absolute()), "{}", s.name);
        assert_eq!(s.expected_relative, Some(counts.relative()), "{}", s.name);
    }
}

#[test]
fn config_text_and_flags_share_keys() {
    let mut cfg = RunConfig::default();
    cfg.apply_config_text(
        "# comment\nscenario = disk_saddle\nbc = relative\nT = 2, 4,8\nh = 0.04\nC0 = 0.5\nk = 9\nseed = 7\n\nformat = csv\noverride_resolution_contract = true\n",
    )
    .unwrap();
    assert_eq!(cfg.scenario, "disk_saddle");
    assert_eq!(cfg.bc, BoundaryCondition::Relative);
    assert_eq!(cfg.t_list, vec![2.0, 4.0, 8.0]);
    assert_eq!((cfg.h, cfg.c0, cfg.k, cfg.seed), (0.04, 0.5, 9, 7));
    assert_eq!(cfg.format, OutputFormat::Csv);
    assert!(cfg.override_resolution_contract);
    assert!(cfg.apply_config_text("colour = blue").is_err());
    assert!(cfg.apply_config_text("no assignment").is_err());
    assert!(cfg.set("T", "4,x").is_err());
}

#[test]
fn contract_violations_are_configuration_errors() {
    let bad = [
        config("nowhere", BoundaryCondition::Absolute, &[4.0], 0.05),
        config("disk_linear", BoundaryCondition::Absolute, &[8.0, 4.0], 0.05),
        config("disk_linear", BoundaryCondition::Absolute, &[], 0.05),
        config("disk_linear", BoundaryCondition::Absolute, &[64.0], 0.1),
        config("interval_robin", BoundaryCondition::Absolute, &[0.0, 1.0], 0.005),
        RunConfig { c0: 0.0, ..Default::default() },
        RunConfig { k: 0, ..Default::default() },
    ];
    for cfg in bad {
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{cfg:?}: {err}");
    }
    let mut over = config("disk_linear", BoundaryCondition::Absolute, &[64.0], 0.1);
    over.override_resolution_contract = true;
    assert_eq!(over.validate().unwrap().len(), 1);
}

#[test]
fn disk_linear_absolute_run() {
    let r = run(&config("disk_linear", BoundaryCondition::Absolute, &[4.0, 8.0, 16.0], 0.05)).unwrap();
    for t in [4.0, 8.0, 16.0] {
        let counts: Vec<usize> = r.gaps.iter().filter(|g| g.t == t).map(|g| g.count).collect();
        assert_eq!(counts, [1, 0, 0]);
    }
    assert!(r.inequalities.as_ref().unwrap().all_hold());
    assert!(r.passed, "{:?}", r.checks);
    assert_eq!(r.comparisons.len(), 3);
}

#[test]
fn disk_saddle_absolute_run() {
    let r = run(&config("disk_saddle", BoundaryCondition::Absolute, &[8.0, 12.0], 0.04)).unwrap();
    let cx = r.complex.as_ref().unwrap();
    assert_eq!(cx.homology.betti, [1, 0, 0]);
    assert!(cx.boundary_squared_zero);
    for c in &r.comparisons {
        assert!(c.comparison.as_ref().unwrap().isomorphism.isomorphism, "T = {}", c.t);
    }
    assert!(r.passed, "{:?}", r.checks);
}

#[test]
fn disk_linear_relative_run() {
    let r = run(&config("disk_linear", BoundaryCondition::Relative, &[8.0, 16.0], 0.05)).unwrap();
    let m = r.morse.as_ref().unwrap();
    assert_eq!(m.expected, m.counts.relative());
    assert_eq!(m.expected, [0, 0, 1]);
    for t in [8.0, 16.0] {
        let counts: Vec<usize> = r.gaps.iter().filter(|g| g.t == t).map(|g| g.count).collect();
        assert_eq!(counts, m.expected);
    }
    assert!(r.comparisons.is_empty());
    assert!(r.passed, "{:?}", r.checks);
}

#[test]
fn interior_minimum_relative_at_low_t_is_reported_not_hidden() {
    let r = run(&config("disk_interior_min", BoundaryCondition::Relative, &[4.0, 8.0], 0.04)).unwrap();
    assert!(!check(&r, "eigenvalue_counts").passed);
    assert!(check(&r, "homology_matches_mesh").passed);
    assert!(!r.passed);
}

#[test]
fn model_suite_run() {
    let r = run(&config("interval_robin", BoundaryCondition::Absolute, &[1.0, 2.0], 0.005)).unwrap();
    assert_eq!(r.model.len(), 2);
    assert!(r.passed, "{:?}", r.checks);
    let row = &r.model[1];
    assert!(row.robin_lowest[0] <= 1e-5 && row.robin_profile_error <= 1e-3);
}

#[test]
fn json_round_trip_and_determinism() {
    let cfg = config("annulus_linear", BoundaryCondition::Absolute, &[4.0, 8.0], 0.08);
    let a = report_json(&run(&cfg).unwrap()).unwrap();
    let b = report_json(&run(&cfg).unwrap()).unwrap();
    assert_eq!(a, b, "same seed and configuration must give byte-identical JSON");
    let parsed: RunReport = serde_json::from_str(&a).unwrap();
    assert_eq!(report_json(&parsed).unwrap(), a);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["config"]["scenario"], "annulus_linear");
    assert_eq!(v["config"]["T"], serde_json::json!([4.0, 8.0]));
}

#[test]
fn csv_gap_table_schema() {
    let r = run(&config("disk_linear", BoundaryCondition::Absolute, &[4.0], 0.1)).unwrap();
    let csv = gap_csv(&r).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("T,degree,bc,count,lambda_small,lambda_big"));
    assert_eq!(lines.count(), 3);
    let dir = std::env::temp_dir().join(format!("wml-csv-{}", std::process::id()));
    let path = emit(&r, OutputFormat::Csv, &dir).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), csv);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn twelve_significant_digits() {
    let r = run(&config("disk_linear", BoundaryCondition::Absolute, &[4.0], 0.1)).unwrap();
    let json = report_json(&r).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    fn walk(v: &serde_json::Value) {
        match v {
            serde_json::Value::Number(n) if n.is_f64() => {
                let s = n.to_string();
                let digits = s.split(['e', 'E']).next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect::<String>();
                assert!(digits.trim_start_matches('0').len() <= 12, "{s}");
            }
            serde_json::Value::Array(a) => a.iter().for_each(walk),
            serde_json::Value::Object(o) => o.values().for_each(walk),
            _ => {}
        }
    }
    walk(&v);
}

fn wml(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wml")).args(args).current_dir(dir).env("WML_THREADS", "2").output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = std::env::temp_dir().join(format!("wml-bin-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = wml(&["list-scenarios"], &dir);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("interval_robin"));
    assert_eq!(wml(&["run", "--scenario", "nowhere"], &dir).status.code(), Some(2));
    assert_eq!(wml(&["run", "--scenario", "disk_linear", "--T", "64", "--h", "0.1"], &dir).status.code(), Some(2));
    assert_eq!(wml(&["run", "--unknown-flag"], &dir).status.code(), Some(2));
    std::fs::write(dir.join("run.cfg"), "scenario = disk_linear\nT = 4\nh = 0.1\nout = res\n").unwrap();
    let ok = wml(&["run", "--config", "run.cfg"], &dir);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.join("res/report.json").exists());
    let fail = wml(&["run", "--scenario", "disk_interior_min", "--bc", "relative", "--T", "4", "--h", "0.04"], &dir);
    assert_eq!(fail.status.code(), Some(1));
    std::fs::remove_dir_all(dir).unwrap();
}
