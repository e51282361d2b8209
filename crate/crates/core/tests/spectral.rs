use std::sync::OnceLock;
use wml_core::cli::find_scenario;
use wml_core::dec::BoundaryCondition::{self, Absolute, Relative};
use wml_core::dec::assemble;
use wml_core::geometry::TriMesh;
use wml_core::model::oscillator_1d;
use wml_core::morse::MorseFunction;
use wml_core::sparse::{norm2, Csr};
use wml_core::spectral::*;

fn scenario_mesh(name: &str, h: f64) -> (TriMesh, MorseFunction) {
    let s = find_scenario(name).unwrap();
    (s.mesh(h).unwrap(), s.morse_function().unwrap())
}

fn disk_linear() -> &'static (TriMesh, MorseFunction) {
    static M: OnceLock<(TriMesh, MorseFunction)> = OnceLock::new();
    M.get_or_init(|| scenario_mesh("disk_linear", 0.05))
}

fn scan(name: &str, h: f64, ts: &[f64], bc: BoundaryCondition) -> GapScan {
    let (mesh, f) = scenario_mesh(name, h);
    let s = find_scenario(name).unwrap();
    let opts = ScanOptions { expected: s.expected(bc), ..Default::default() };
    gap_scan(&mesh, &f, ts, 1.0, bc, &opts).unwrap()
}

#[test]
fn identity_pencil() {
    for n in [40, 400] {
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let m = Csr::diagonal(&d);
        let ep = lowest_eigenpairs(&m, &m, 3, 1e-10, 0).unwrap();
        assert!(ep.values.iter().all(|v| (v - 1.0).abs() < 1e-10), "n = {n}: {:?}", ep.values);
    }
}

#[test]
fn requesting_too_many_pairs_is_rejected() {
    let m = Csr::identity(5);
    assert!(lowest_eigenpairs(&m, &m, 6, 1e-10, 0).is_err());
    assert!(lowest_eigenpairs(&m, &Csr::identity(4), 1, 1e-10, 0).is_err());
}

#[test]
fn undeformed_neumann_kernel() {
    let (mesh, _) = disk_linear();
    let asm = assemble(mesh, &MorseFunction::constant(0.0), Absolute).unwrap();
    let e = solve_entry(&asm, 0.0, 0, 1, 1e-10, 0).unwrap();
    assert!(e.eigenvalues[0].abs() < 1e-10);
    let v = &e.eigenvectors[0].values;
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!((hi - lo) < 1e-8 * hi.abs().max(lo.abs()));
}

#[test]
fn oscillator_pencil_spectrum() {
    let op = oscillator_1d(1.0, 8.0, 0.01).unwrap();
    let ep = lowest_eigenpairs(&op.pencil.a, &op.pencil.m, 3, 1e-10, 0).unwrap();
    for (v, want) in ep.values.iter().zip([0.0, 2.0, 4.0]) {
        assert!((v - want).abs() < 1e-3, "{:?}", ep.values);
    }
}

#[test]
fn residuals_hold_post_hoc() {
    let (mesh, f) = disk_linear();
    for (bc, t) in [(Absolute, 8.0), (Relative, 4.0)] {
        let asm = assemble(mesh, f, bc).unwrap();
        for k in 0..3 {
            let tol = 1e-9;
            let form = asm.witten_quadratic_form(t, k).unwrap();
            let e = solve_entry(&asm, t, k, 4, tol, 3).unwrap();
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!(e.eigenvalues.iter().all(|v| *v >= 0.0));
            let x1: Vec<f64> = (0..form.dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let a_scale = norm2(&form.apply(&x1)) / norm2(&x1);
            let m_scale = norm2(&form.mass.matvec(&x1)) / norm2(&x1);
            for (lam, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
                let x = asm.restrict(k, &v.values);
                let ax = form.apply(&x);
                let mx = form.mass.matvec(&x);
                let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, m)| a - lam * m).collect();
                // a_scale and m_scale are lower bounds of the operator norms.
                let rel = norm2(&r) / ((form.upper.norm_inf().max(a_scale) + lam * m_scale) * norm2(&x));
                assert!(rel <= 10.0 * tol, "{bc:?} degree {k}: {rel:e}");
            }
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let (mesh, f) = disk_linear();
    let asm = assemble(mesh, f, Absolute).unwrap();
    let a = solve_entry(&asm, 8.0, 1, 4, 1e-10, 11).unwrap();
    let b = solve_entry(&asm, 8.0, 1, 4, 1e-10, 11).unwrap();
    assert_eq!(a, b);
    let c = solve_entry(&asm, 8.0, 1, 4, 1e-10, 12).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&c.eigenvalues) {
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
    }
}

#[test]
fn counts_below_c0() {
    let (mesh, f) = disk_linear();
    let t = 16.0;
    let count = |bc: BoundaryCondition, mesh: &TriMesh, f: &MorseFunction| -> [usize; 3] {
        let asm = assemble(mesh, f, bc).unwrap();
        std::array::from_fn(|k| count_below(&solve_entry(&asm, t, k, 6, 1e-10, 0).unwrap(), 1.0).unwrap())
    };
    assert_eq!(count(Absolute, mesh, f), [1, 0, 0]);
    assert_eq!(count(Relative, mesh, f), [0, 0, 1]);
    let (ann, g) = scenario_mesh("annulus_linear", 0.05);
    assert_eq!(count(Absolute, &ann, &g), [1, 1, 0]);
}

#[test]
fn unresolved_threshold_is_an_error() {
    let (mesh, f) = disk_linear();
    let asm = assemble(mesh, f, Absolute).unwrap();
    let e = solve_entry(&asm, 8.0, 0, 2, 1e-10, 0).unwrap();
    assert!(matches!(count_below(&e, 1e6), Err(wml_core::Error::Resolution(_))));
}

#[test]
fn disk_linear_gap_scan() {
    let g = scan("disk_linear", 0.05, &[4.0, 8.0, 16.0], Absolute);
    assert!(g.findings.is_empty(), "{:?}", g.findings);
    for t in [4.0, 8.0, 16.0] {
        assert_eq!(g.counts_at(t), [1, 0, 0]);
    }
    let f0 = &g.fits[0];
    assert!(f0.small_vanishes || f0.small_slope.is_some_and(|s| s < 0.0), "{f0:?}");
    assert!(g.rows.iter().filter(|r| r.degree == 2).all(|r| r.count == 0 && r.lambda_small.is_none()));
    assert!(g.fits.iter().all(|f| f.big_floor.is_some_and(|b| b > 0.0)));
}

#[test]
fn tunnelling_eigenvalue_decays() {
    // Relative mode around an interior minimum: one eigenvalue below C0 in
    // degree 0 that is not cohomological and decays exponentially in T.
    let g = scan("disk_interior_min", 0.04, &[6.0, 8.0, 10.0], Relative);
    assert!(g.findings.is_empty(), "{:?}", g.findings);
    let f0 = &g.fits[0];
    assert!(!f0.small_vanishes);
    assert!(f0.small_slope.unwrap() < 0.0, "{f0:?}");
    let small: Vec<f64> = g.rows.iter().filter(|r| r.degree == 0).map(|r| r.lambda_small.unwrap()).collect();
    assert!(small.windows(2).all(|w| w[1] < w[0]), "{small:?}");
}

#[test]
fn saddle_tunnelling_is_below_working_precision() {
    let g = scan("disk_saddle", 0.05, &[4.0, 8.0, 12.0], Absolute);
    assert!(g.findings.is_empty(), "{:?}", g.findings);
    assert!(g.fits[0].small_vanishes && g.fits[1].small_vanishes);
}

#[test]
fn zero_t_counts_are_betti_numbers() {
    assert_eq!(scan("disk_linear", 0.1, &[0.0], Absolute).counts_at(0.0), [1, 0, 0]);
    assert_eq!(scan("annulus_linear", 0.08, &[0.0], Absolute).counts_at(0.0), [1, 1, 0]);
    assert_eq!(scan("disk_linear", 0.1, &[0.0], Relative).counts_at(0.0), [0, 0, 1]);
}

#[test]
fn counts_agree_across_resolutions() {
    for name in ["disk_linear", "annulus_linear"] {
        let coarse = scan(name, 0.1, &[4.0, 8.0, 16.0], Absolute);
        let fine = scan(name, 0.05, &[4.0, 8.0, 16.0], Absolute);
        for t in [4.0, 8.0, 16.0] {
            assert_eq!(coarse.counts_at(t), fine.counts_at(t), "{name} T = {t}");
        }
    }
}

#[test]
fn scan_input_contracts() {
    let (mesh, f) = disk_linear();
    let opts = ScanOptions::default();
    for ts in [&[8.0, 4.0][..], &[][..], &[-1.0][..]] {
        assert!(matches!(gap_scan(mesh, f, ts, 1.0, Absolute, &opts), Err(wml_core::Error::Configuration(_))));
    }
    assert!(gap_scan(mesh, f, &[4.0], 0.0, Absolute, &opts).is_err());
    // h ≈ 0.05 resolves T up to 100; T = 400 breaks the contract.
    assert!(matches!(gap_scan(mesh, f, &[400.0], 1.0, Absolute, &opts), Err(wml_core::Error::Configuration(_))));
    assert!(check_resolution(0.05, 100.0).is_ok());
    assert!(check_resolution(0.1, 100.0).is_err());
}

#[test]
fn scan_serialization() {
    let g = scan("disk_linear", 0.1, &[4.0, 8.0], Absolute);
    let json = serde_json::to_string(&g.report).unwrap();
    let back: SpectralReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, g.report);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["C0"], 1.0);
    assert!(v["entries"][0].get("T").is_some());
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("T,degree,bc,count,lambda_small,lambda_big"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..4], ["4", "0", "absolute", "1"]);
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn least_squares_slope() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
    assert!((ls_slope(&pts) + 0.5).abs() < 1e-14);
}
