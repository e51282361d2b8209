use proptest::prelude::*;
use std::sync::OnceLock;

use wml_core::chainmap::*;
use wml_core::cli::find_scenario;
use wml_core::dec::{assemble, BoundaryCondition, Cochain, WittenAssembly};
use wml_core::geometry::*;
use wml_core::morse::*;
use wml_core::spectral::{solve_entry, SpectralEntry};

struct Run {
    mesh: TriMesh,
    data: MorseComplexData,
    asm: WittenAssembly,
    quasimode_radius: f64,
}

fn scenario_run(name: &str, h: f64) -> Run {
    let sc = find_scenario(name).unwrap();
    let f = sc.morse_function().unwrap();
    let mesh = sc.mesh(h).unwrap();
    let data = morse_complex(&f, &sc.surface_domain().unwrap(), BoundaryCondition::Absolute, &sc.complex_settings()).unwrap();
    let asm = assemble(&mesh, &f, BoundaryCondition::Absolute).unwrap();
    Run { mesh, data, asm, quasimode_radius: sc.quasimode_radius }
}

fn entries(r: &Run, t: f64) -> Vec<SpectralEntry> {
    (0..3).map(|j| solve_entry(&r.asm, t, j, r.data.complex.generators[j].len() + 3, 1e-10, 0).unwrap()).collect()
}

fn run_compare(r: &Run, t: f64) -> Comparison {
    let e = entries(r, t);
    compare(&r.asm, &r.mesh, &r.data, [&e[0], &e[1], &e[2]], 1.0, r.quasimode_radius).unwrap()
}

fn disk_linear() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| scenario_run("disk_linear", 0.04))
}

fn disk_saddle() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| scenario_run("disk_saddle", 0.04))
}

fn unit_disk_mesh() -> &'static TriMesh {
    static MESH: OnceLock<TriMesh> = OnceLock::new();
    MESH.get_or_init(|| build_mesh(&SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap(), 0.1).unwrap())
}

fn curve_cell(pts: Vec<[f64; 2]>) -> UnstableCell {
    UnstableCell {
        critical: 0,
        dim: 1,
        frame: vec![[1.0, 0.0]],
        orientation: 1.0,
        geometry: CellGeometry::Curve(pts),
        branches: vec![],
    }
}

fn arc(n: usize) -> Vec<[f64; 2]> {
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            [-0.6 + 1.2 * s, -0.3 + 0.7 * s * s]
        })
        .collect()
}

fn point_cell(p: [f64; 2]) -> UnstableCell {
    UnstableCell { dim: 0, geometry: CellGeometry::Point(p), frame: vec![], ..curve_cell(vec![]) }
}

#[test]
fn constant_zero_cochain_on_a_point_is_one() {
    let mesh = unit_disk_mesh();
    let one = Cochain { degree: 0, values: vec![1.0; mesh.vertices.len()] };
    let v = integrate_over_unstable(mesh, &one, &point_cell([0.23, -0.41])).unwrap();
    assert!((v - 1.0).abs() < 1e-14);
}

#[test]
fn stokes_on_a_curve() {
    let mesh = unit_disk_mesh();
    let g = |p: [f64; 2]| p[0].sin() + p[1] * p[1] + 0.3 * p[0] * p[1];
    let gv: Vec<f64> = mesh.vertices.iter().map(|&p| g(p)).collect();
    let dg = Cochain { degree: 1, values: mesh.d0.matvec(&gv) };
    let pts = arc(37);
    let (x, y) = (pts[0], pts[pts.len() - 1]);
    let integral = integrate_over_unstable(mesh, &dg, &curve_cell(pts)).unwrap();
    // Exact against the interpolant, O(h²) against g itself.
    let g0 = Cochain { degree: 0, values: gv };
    let interp = |p| integrate_over_unstable(mesh, &g0, &point_cell(p)).unwrap();
    assert!((integral - (interp(y) - interp(x))).abs() < 1e-13);
    assert!((integral - (g(y) - g(x))).abs() < 1e-2);
}

#[test]
fn reversing_a_curve_negates() {
    let mesh = unit_disk_mesh();
    let alpha = Cochain { degree: 1, values: (0..mesh.edges.len()).map(|e| ((e * 37) % 11) as f64 - 5.0).collect() };
    let cell = curve_cell(arc(20));
    let a = integrate_over_unstable(mesh, &alpha, &cell).unwrap();
    let b = integrate_over_unstable(mesh, &alpha, &cell.reversed()).unwrap();
    assert!(a.abs() > 1e-6);
    assert!((a + b).abs() < 1e-12 * a.abs().max(1.0));
}

#[test]
fn patch_integrates_the_area_form_and_flips_with_orientation() {
    // An interior maximum whose unstable cell is the whole disk.
    let dom = SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap();
    let f = MorseFunction::quadratic("max", [[-1.0, 0.0], [0.0, -1.0]], [0.1, 0.0], 0.0);
    let s = ComplexSettings { adaptation_radius: 0.1, grid_density: 40, tol: 1e-9, connections: ConnectionOptions::default() };
    let data = morse_complex(&f, &dom, BoundaryCondition::Absolute, &s).unwrap();
    assert_eq!(data.cells[2].len(), 1);
    let cell = &data.cells[2][0];
    let mesh = build_mesh(&dom, 0.1).unwrap();
    let area = Cochain { degree: 2, values: (0..mesh.triangles.len()).map(|t| mesh.area(t)).collect() };
    let a = integrate_over_unstable(&mesh, &area, cell).unwrap();
    assert!((a.abs() - cell.area()).abs() < 1e-2 * cell.area(), "{a} vs {}", cell.area());
    let b = integrate_over_unstable(&mesh, &area, &cell.reversed()).unwrap();
    assert!((a + b).abs() < 1e-12);
}

#[test]
fn degree_mismatch_is_rejected() {
    let mesh = unit_disk_mesh();
    let zero = Cochain { degree: 0, values: vec![0.0; mesh.vertices.len()] };
    assert!(matches!(integrate_over_unstable(mesh, &zero, &curve_cell(arc(3))), Err(wml_core::Error::InvalidInput(_))));
    let short = Cochain { degree: 1, values: vec![0.0; 3] };
    assert!(integrate_over_unstable(mesh, &short, &curve_cell(arc(3))).is_err());
}

#[test]
fn disk_linear_single_nonzero_entry_and_empty_degrees() {
    let r = disk_linear();
    let c = run_compare(r, 12.0);
    let m = &c.matrices;
    assert_eq!(m.p[0].len(), 1);
    assert_eq!(m.p[0][0].len(), 1);
    assert!(m.p[0][0][0].abs() > 0.0);
    for j in [1, 2] {
        assert!(m.p[j].is_empty() && m.e[j].is_empty());
        assert!(c.isomorphism.degrees[j].isomorphic, "empty degree is vacuously isomorphic");
    }
}

#[test]
fn disk_linear_normalized_product_near_identity() {
    let c = run_compare(disk_linear(), 12.0);
    let n = c.isomorphism.degrees[0].normalized[0][0];
    assert!((n - 1.0).abs() <= 0.1, "normalized product {n}");
    assert!(c.isomorphism.isomorphism);
    // No generators in degree 1, so ∂ = 0 and the residual measures ‖P d_T‖.
    assert!(c.commutation.max_residual <= 1e-2);
    assert_eq!(c.induced_betti, [1, 0, 0]);
}

#[test]
fn predicted_exponents_follow_the_generator_kind() {
    let r = disk_saddle();
    let t = 12.0;
    for g in r.data.complex.generators.iter().flatten() {
        let (fv, nv) = predicted_exponents(g, t);
        match g.kind {
            CriticalKind::Interior => {
                assert_eq!(fv, g.f_value);
                assert_eq!(nv, g.index as f64);
            }
            _ => {
                assert!((fv - g.f_value - (2.0 * std::f64::consts::PI).ln() / (2.0 * t)).abs() < 1e-15);
                assert_eq!(nv, g.index as f64 - 0.5);
            }
        }
    }
}

#[test]
fn saddle_comparison_is_nonsingular_with_matching_homology() {
    let r = disk_saddle();
    let c = run_compare(r, 12.0);
    for j in [0, 1] {
        let d = &c.isomorphism.degrees[j];
        assert!(d.isomorphic, "degree {j}: {:?}", d.singular_values);
        assert!(d.singular_values.iter().all(|s| (0.5..=1.5).contains(s)));
    }
    assert!(c.commutation.max_residual <= 1e-2, "{:?}", c.commutation.residuals);
    assert_eq!(c.induced_betti, homology_ranks(&r.data.complex).betti);
    // The induced boundary reproduces the integer one.
    for (a, b) in c.commutation.induced_boundary[0].iter().flatten().zip(r.data.complex.boundary[0].iter().flatten()) {
        assert!((a - *b as f64).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn saddle_product_approaches_identity_as_t_grows() {
    let r = disk_saddle();
    let mut prev_diag = f64::INFINITY;
    let mut prev_off = f64::INFINITY;
    for t in [4.0, 6.0, 9.0] {
        let c = run_compare(r, t);
        let diag = c.isomorphism.degrees.iter().flat_map(|d| d.diagonal_errors.iter().copied()).fold(0.0, f64::max);
        let off = c.isomorphism.degrees.iter().map(|d| d.off_diagonal_mass).fold(0.0, f64::max);
        assert!(diag < prev_diag, "T={t}: diagonal error {diag} after {prev_diag}");
        // Quasimodes of distinct generators have disjoint supports, so the
        // off-diagonal mass starts at roundoff and must stay there.
        assert!(off <= prev_off.max(1e-12) && off <= 1e-10, "T={t}: off-diagonal {off}");
        prev_diag = diag;
        prev_off = off;
    }
    assert!(prev_diag < 1e-4);
}

#[test]
fn flipping_a_generator_frame_is_equivariant() {
    let r = disk_saddle();
    let t = 9.0;
    let e = entries(r, t);
    let base = compare(&r.asm, &r.mesh, &r.data, [&e[0], &e[1], &e[2]], 1.0, r.quasimode_radius).unwrap();
    let mut data = r.data.clone();
    let g = &mut data.complex.generators[1][0];
    g.frame.iter_mut().for_each(|v| *v = [-v[0], -v[1]]);
    data.cells[1][0] = data.cells[1][0].reversed();
    data.complex.boundary[0][0].iter_mut().for_each(|v| *v = -*v);
    let flipped = compare(&r.asm, &r.mesh, &data, [&e[0], &e[1], &e[2]], 1.0, r.quasimode_radius).unwrap();
    for (a, b) in base.matrices.p[1][0].iter().zip(&flipped.matrices.p[1][0]) {
        assert!((a + b).abs() <= 1e-12 * a.abs().max(b.abs()), "row not negated: {a} {b}");
    }
    for j in 0..3 {
        let (s0, s1) = (&base.isomorphism.degrees[j].singular_values, &flipped.isomorphism.degrees[j].singular_values);
        for (a, b) in s0.iter().zip(s1) {
            assert!((a - b).abs() < 1e-9, "degree {j}: {s0:?} vs {s1:?}");
        }
    }
    assert_eq!(flipped.induced_betti, base.induced_betti);
}

#[test]
fn relative_complex_is_rejected_by_the_comparison() {
    let sc = find_scenario("disk_linear").unwrap();
    let f = sc.morse_function().unwrap();
    let mesh = sc.mesh(0.1).unwrap();
    let asm = assemble(&mesh, &f, BoundaryCondition::Relative).unwrap();
    let data = morse_complex(&f, &sc.surface_domain().unwrap(), BoundaryCondition::Relative, &sc.complex_settings()).unwrap();
    let e: Vec<_> = (0..3).map(|j| solve_entry(&asm, 4.0, j, 4, 1e-10, 0).unwrap()).collect();
    let basis = instanton_basis(&asm, [&e[0], &e[1], &e[2]], 1.0).unwrap();
    assert!(comparison_matrices(&asm, &mesh, &data, &basis, 0.45).is_err());
}

#[test]
fn instanton_basis_is_orthonormal_and_below_c0() {
    let r = disk_saddle();
    let e = entries(r, 9.0);
    let basis = instanton_basis(&r.asm, [&e[0], &e[1], &e[2]], 1.0).unwrap();
    for j in 0..3 {
        assert_eq!(basis.vectors[j].len(), r.data.complex.generators[j].len());
        assert!(basis.eigenvalues[j].iter().all(|&l| l < 1.0));
        let m = r.asm.mass_free(j);
        for a in &basis.vectors[j] {
            for b in &basis.vectors[j] {
                let x = r.asm.restrict(j, &a.values);
                let y = r.asm.restrict(j, &b.values);
                let ip: f64 = x.iter().zip(m.matvec(&y)).map(|(p, q)| p * q).sum();
                let expect = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curve_reversal_is_antisymmetric(seed in 0u64..1000, n in 2usize..30) {
        let mesh = unit_disk_mesh();
        let vals: Vec<f64> = (0..mesh.edges.len()).map(|e| (((e as u64 + 1) * (seed + 7)) % 97) as f64 / 97.0 - 0.5).collect();
        let alpha = Cochain { degree: 1, values: vals };
        let cell = curve_cell(arc(n));
        let a = integrate_over_unstable(mesh, &alpha, &cell).unwrap();
        let b = integrate_over_unstable(mesh, &alpha, &cell.reversed()).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn exact_forms_telescope(ax in -0.7f64..0.7, ay in -0.7f64..0.7, bx in -0.7f64..0.7, by in -0.7f64..0.7, k in 1usize..12) {
        let mesh = unit_disk_mesh();
        let g: Vec<f64> = mesh.vertices.iter().map(|p| (3.0 * p[0]).cos() * p[1] + p[0]).collect();
        let dg = Cochain { degree: 1, values: mesh.d0.matvec(&g) };
        let pts: Vec<[f64; 2]> = (0..=k).map(|i| {
            let s = i as f64 / k as f64;
            [ax + s * (bx - ax), ay + s * (by - ay)]
        }).collect();
        let g0 = Cochain { degree: 0, values: g };
        let val = |p| integrate_over_unstable(mesh, &g0, &point_cell(p)).unwrap();
        let i = integrate_over_unstable(mesh, &dg, &curve_cell(pts)).unwrap();
        prop_assert!((i - (val([bx, by]) - val([ax, ay]))).abs() < 1e-12);
    }
}
