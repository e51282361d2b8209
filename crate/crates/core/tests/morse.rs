use proptest::prelude::*;
use wml_core::cli::{find_scenario, registry, Scenario};
use wml_core::dec::BoundaryCondition::{self, Absolute, Relative};
use wml_core::geometry::{build_mesh, SurfaceDomain};
use wml_core::morse::*;

const GRID: usize = 40;
const TOL: f64 = 1e-9;

fn near(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    (a[0] - b[0]).hypot(a[1] - b[1]) < tol
}

fn find<'a>(pts: &'a [CriticalPoint], at: [f64; 2]) -> &'a CriticalPoint {
    pts.iter().find(|p| near(p.location, at, 1e-7)).unwrap_or_else(|| panic!("no critical point at {at:?}"))
}

fn linear_x() -> MorseFunction {
    MorseFunction::linear("x", [1.0, 0.0])
}

fn unit_disk() -> SurfaceDomain {
    SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap()
}

fn saddle() -> (MorseFunction, SurfaceDomain) {
    (
        MorseFunction::quadratic("x^2 - y^2", [[2.0, 0.0], [0.0, -2.0]], [0.0, 0.0], 0.0),
        SurfaceDomain::disk([0.0, 0.0], 2.0).unwrap(),
    )
}

/// |x|²/2 on an annulus whose hole sits to the right of the origin: an
/// interior minimum plus a C₋ point of index 1 on the inner loop.
fn offcenter_annulus() -> (MorseFunction, SurfaceDomain) {
    (
        MorseFunction::quadratic("r^2/2", [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0),
        SurfaceDomain::annulus([0.8, 0.0], 0.3, 2.5).unwrap(),
    )
}

fn field_for(f: &MorseFunction, dom: &SurfaceDomain, a: f64) -> PseudoGradientField {
    let pts = find_critical_points(f, dom, GRID, TOL).unwrap().points;
    adapted_field(f, dom, a, &pts).unwrap()
}

fn settings(a: f64) -> ComplexSettings {
    ComplexSettings { adaptation_radius: a, grid_density: GRID, tol: TOL, connections: ConnectionOptions::default() }
}

fn scenario_complex(s: &Scenario, bc: BoundaryCondition) -> MorseComplexData {
    morse_complex(&s.morse_function().unwrap(), &s.surface_domain().unwrap(), bc, &s.complex_settings()).unwrap()
}

#[test]
fn critical_points_of_x_on_disk() {
    let pts = find_critical_points(&linear_x(), &unit_disk(), GRID, TOL).unwrap().points;
    assert_eq!(pts.len(), 2);
    let m = find(&pts, [-1.0, 0.0]);
    assert_eq!((m.kind, m.index), (CriticalKind::BoundaryMinus, 0));
    let p = find(&pts, [1.0, 0.0]);
    assert_eq!((p.kind, p.index), (CriticalKind::BoundaryPlus, 1));
    assert!((m.normal_derivative.unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn critical_points_of_shifted_paraboloid() {
    let f = MorseFunction::quadratic("m", [[1.0, 0.0], [0.0, 1.0]], [0.1, 0.0], 0.0);
    let pts = find_critical_points(&f, &unit_disk(), GRID, TOL).unwrap().points;
    assert_eq!(pts.len(), 3);
    let c = find(&pts, [-0.1, 0.0]);
    assert_eq!((c.kind, c.index), (CriticalKind::Interior, 0));
    for at in [[1.0, 0.0], [-1.0, 0.0]] {
        assert_eq!(find(&pts, at).kind, CriticalKind::BoundaryPlus);
    }
}

#[test]
fn critical_points_of_saddle() {
    let (f, dom) = saddle();
    let pts = find_critical_points(&f, &dom, GRID, TOL).unwrap().points;
    assert_eq!(pts.len(), 5);
    let s = find(&pts, [0.0, 0.0]);
    assert_eq!((s.kind, s.index), (CriticalKind::Interior, 1));
    for at in [[0.0, 2.0], [0.0, -2.0]] {
        let p = find(&pts, at);
        assert_eq!((p.kind, p.index), (CriticalKind::BoundaryMinus, 0));
        // νf = 4 cos 2θ at radius 2.
        assert!((p.normal_derivative.unwrap() + 4.0).abs() < 1e-8);
    }
    for at in [[2.0, 0.0], [-2.0, 0.0]] {
        let p = find(&pts, at);
        assert_eq!((p.kind, p.index), (CriticalKind::BoundaryPlus, 1));
    }
}

#[test]
fn degenerate_interior_point_is_rejected() {
    let f = MorseFunction::quadratic("x^2", [[2.0, 0.0], [0.0, 0.0]], [0.0, 0.3], 0.0);
    let g = MorseFunction::new("x^2 + y^3", |p| p[0] * p[0] + p[1].powi(3), |p| [2.0 * p[0], 3.0 * p[1] * p[1]], |p| {
        [[2.0, 0.0], [0.0, 6.0 * p[1]]]
    });
    assert!(find_critical_points(&f, &unit_disk(), GRID, TOL).unwrap().points.iter().all(|p| p.kind != CriticalKind::Interior));
    assert!(matches!(find_critical_points(&g, &unit_disk(), GRID, TOL), Err(wml_core::Error::MorseViolation(_))));
}

#[test]
fn counts_examples() {
    let pts = find_critical_points(&linear_x(), &unit_disk(), GRID, TOL).unwrap().points;
    let c = morse_counts(&pts);
    assert_eq!((c.c, c.p, c.q), ([0, 0, 0], [1, 0], [0, 1]));
    let ann = SurfaceDomain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
    let c = morse_counts(&find_critical_points(&linear_x(), &ann, GRID, TOL).unwrap().points);
    assert_eq!((c.c, c.p, c.q), ([0, 0, 0], [1, 1], [1, 1]));
    assert_eq!(morse_counts(&[]), MorseCounts::default());
}

#[test]
fn field_examples() {
    let fld = field_for(&linear_x(), &unit_disk(), 0.1);
    assert!(near(fld.value([0.0, 0.0]), [-1.0, 0.0], 1e-12));
    let top = [0.0, 1.0];
    let v = fld.value(top);
    assert!(v[1] < 0.0, "X points inward at the top, got {v:?}");
    assert!(near(fld.value([-1.0, 0.0]), [0.0, 0.0], 1e-12));
    let th = std::f64::consts::PI - 0.03;
    let b = [th.cos(), th.sin()];
    let v = fld.value(b);
    assert!((v[0] * b[0] + v[1] * b[1]).abs() < 1e-9, "X tangent near the C₋ point, got {v:?}");
    assert!(fld.verify(60).ok());
}

#[test]
fn field_rejects_overlapping_balls() {
    let pts = find_critical_points(&linear_x(), &unit_disk(), GRID, TOL).unwrap().points;
    assert!(adapted_field(&linear_x(), &unit_disk(), 0.6, &pts).is_err());
}

#[test]
fn scenario_fields_verify() {
    for s in registry().into_iter().filter(|s| s.is_surface()) {
        let d = scenario_complex(&s, Absolute);
        let chk = d.field.verify(60);
        assert!(chk.ok(), "{}: {chk:?}", s.name);
    }
}

#[test]
fn flow_examples() {
    let (f, dom) = saddle();
    let fld = field_for(&f, &dom, 0.2);
    let opts = FlowOptions::for_field(&fld);
    let line = trace_flow(&fld, [0.0, 0.01], Direction::Forward, &opts).unwrap();
    let FlowLimit::Critical(i) = line.limit else { panic!("{:?}", line.limit) };
    assert!(near(fld.criticals[i].location, [0.0, 2.0], 1e-9));
    assert!(line.points.iter().all(|p| p[0].abs() < 1e-9 && p[0].hypot(p[1]) <= 2.0 + 1e-9));

    let origin = find(&fld.criticals, [0.0, 0.0]).location;
    let at = trace_flow(&fld, origin, Direction::Forward, &opts).unwrap();
    assert!(matches!(at.limit, FlowLimit::Critical(_)));
    assert!(at.length == 0.0 && at.points.len() <= 1);

    let fld = field_for(&linear_x(), &unit_disk(), 0.1);
    let line = trace_flow(&fld, [0.0, 0.0], Direction::Forward, &FlowOptions::for_field(&fld)).unwrap();
    let FlowLimit::Critical(i) = line.limit else { panic!("{:?}", line.limit) };
    assert!(near(fld.criticals[i].location, [-1.0, 0.0], 1e-9));
    assert!(line.points.iter().all(|p| p[1].abs() < 1e-12));
}

#[test]
fn unstable_manifold_examples() {
    let (f, dom) = saddle();
    let fld = field_for(&f, &dom, 0.2);
    let idx = |at: [f64; 2]| fld.criticals.iter().position(|p| near(p.location, at, 1e-7)).unwrap();
    let pt = unstable_manifold(&fld, idx([0.0, 2.0]), 90).unwrap();
    assert_eq!(pt.dim, 0);
    assert!(matches!(pt.geometry, CellGeometry::Point(p) if near(p, [0.0, 2.0], 1e-9)));
    let curve = unstable_manifold(&fld, idx([0.0, 0.0]), 90).unwrap();
    assert_eq!(curve.dim, 1);
    let CellGeometry::Curve(pts) = &curve.geometry else { panic!() };
    assert!(pts.iter().all(|p| p[0].abs() < 1e-6), "curve leaves the y-axis chord");
    let ends = [pts[0], pts[pts.len() - 1]];
    assert!(ends.iter().any(|e| near(*e, [0.0, 2.0], 1e-3)) && ends.iter().any(|e| near(*e, [0.0, -2.0], 1e-3)));
    assert!(unstable_manifold(&fld, idx([2.0, 0.0]), 90).is_err(), "C₊ points are not zeros of X");

    // An interior maximum: -(|x|²/2 + 0.1x) on the unit disk.
    let g = MorseFunction::quadratic("max", [[-1.0, 0.0], [0.0, -1.0]], [-0.1, 0.0], 0.0);
    let fld = field_for(&g, &unit_disk(), 0.1);
    let top = fld.criticals.iter().position(|p| p.kind == CriticalKind::Interior).unwrap();
    let patch = unstable_manifold(&fld, top, 90).unwrap();
    assert_eq!(patch.dim, 2);
    assert!(patch.area() > 0.9 * std::f64::consts::PI, "area {}", patch.area());
}

#[test]
fn connection_examples() {
    let (f, dom) = saddle();
    let fld = field_for(&f, &dom, 0.2);
    let idx = |at: [f64; 2]| fld.criticals.iter().position(|p| near(p.location, at, 1e-7)).unwrap();
    let opts = ConnectionOptions::default();
    let n = connection_count(&fld, idx([0.0, 0.0]), idx([0.0, 2.0]), &opts).unwrap();
    assert_eq!(n.count.abs(), 1);
    assert_eq!(n.lines.len(), 1);
    assert!(connection_count(&fld, idx([0.0, 2.0]), idx([0.0, -2.0]), &opts).is_err());

    let (f, dom) = offcenter_annulus();
    let fld = field_for(&f, &dom, 0.05);
    let q = fld.criticals.iter().position(|p| p.kind == CriticalKind::BoundaryMinus && p.index == 1).unwrap();
    let p = fld.criticals.iter().position(|p| p.kind == CriticalKind::Interior).unwrap();
    let n = connection_count(&fld, q, p, &opts).unwrap();
    assert_eq!(n.count, 0);
    assert!(n.lines.is_empty());
}

#[test]
fn complex_examples() {
    let d = morse_complex(&linear_x(), &unit_disk(), Absolute, &settings(0.1)).unwrap();
    assert_eq!(d.complex.ranks(), [1, 0, 0]);
    assert!(d.complex.boundary.iter().all(|m| m.is_empty()));
    assert_eq!(homology_ranks(&d.complex).betti, [1, 0, 0]);

    let (f, dom) = saddle();
    let d = morse_complex(&f, &dom, Absolute, &settings(0.2)).unwrap();
    assert_eq!(d.complex.ranks(), [2, 1, 0]);
    let row = &d.complex.boundary[0][0];
    assert!(row.iter().all(|v| v.abs() == 1), "{row:?}");
    assert_eq!(homology_ranks(&d.complex).betti, [1, 0, 0]);

    let ann = SurfaceDomain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
    let d = morse_complex(&linear_x(), &ann, Absolute, &settings(0.05)).unwrap();
    assert_eq!(d.complex.ranks(), [1, 1, 0]);
    let h = homology_ranks(&d.complex);
    assert_eq!(h.betti, [1, 1, 0]);
    assert!(h.torsion.iter().all(|t| t.is_empty()));

    let empty = ThomSmaleComplex {
        mode: Absolute,
        generators: Default::default(),
        boundary: Default::default(),
        flow_lines: Default::default(),
        diagnostics: vec![],
    };
    assert_eq!(homology_ranks(&empty).betti, [0, 0, 0]);
}

#[test]
fn complex_json_export() {
    let d = morse_complex(&linear_x(), &unit_disk(), Absolute, &settings(0.1)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&complex_json(&d.complex).unwrap()).unwrap();
    assert_eq!(v["generators"][0][0]["kind"], "BoundaryMinus");
    assert_eq!(v["generators"][0][0]["location"][0], -1.0);
}

#[test]
fn offcenter_annulus_complex() {
    let (f, dom) = offcenter_annulus();
    let d = morse_complex(&f, &dom, Absolute, &settings(0.05)).unwrap();
    assert_eq!(d.counts.c, [1, 0, 0]);
    assert_eq!(d.counts.p, [0, 1]);
    assert_eq!(d.complex.boundary[0], vec![vec![0]]);
    assert_eq!(homology_ranks(&d.complex).betti, [1, 1, 0]);
}

#[test]
fn smith_normal_form() {
    assert_eq!(smith_invariants(&[vec![2, 4], vec![6, 8]]), vec![2, 4]);
    assert_eq!(smith_invariants(&[vec![1, -1], vec![-1, 1]]), vec![1]);
    assert!(smith_invariants(&[vec![0, 0]]).is_empty());
}

#[test]
fn inequality_examples() {
    let disk_counts = MorseCounts { c: [0, 0, 0], p: [1, 0], q: [0, 1] };
    let m = morse_inequalities(&disk_counts, [1, 0, 0], Absolute);
    let sums: Vec<(i64, i64)> = m.rows.iter().map(|r| (r.betti_sum, r.count_sum)).collect();
    assert_eq!(sums, [(1, 1), (-1, -1), (1, 1)]);
    assert!(m.all_hold());

    let ann = MorseCounts { c: [0, 0, 0], p: [1, 1], q: [1, 1] };
    let m = morse_inequalities(&ann, [1, 1, 0], Absolute);
    assert!(m.equality_at_top && m.all_hold());
    assert_eq!((m.rows[2].betti_sum, m.rows[2].count_sum), (0, 0));

    let m = morse_inequalities(&disk_counts, [0, 0, 1], Relative);
    assert_eq!(m.counts, [0, 0, 1]);
    assert!(m.rows.iter().all(|r| r.betti_sum == r.count_sum));

    let m = morse_inequalities(&MorseCounts { c: [0, 0, 0], p: [0, 0], q: [0, 0] }, [1, 0, 0], Absolute);
    assert!(!m.rows[0].holds && !m.all_hold());
}

#[test]
fn scenario_invariants() {
    for s in registry().into_iter().filter(|s| s.is_surface()) {
        let mesh = build_mesh(&s.surface_domain().unwrap(), 0.1).unwrap();
        let (abs_betti, rel_betti) = mesh.betti();
        for (bc, betti) in [(Absolute, abs_betti), (Relative, rel_betti)] {
            let d = scenario_complex(&s, bc);
            assert!(d.complex.boundary_squared().iter().flatten().all(|&v| v == 0), "{} {bc:?}", s.name);
            let h = homology_ranks(&d.complex);
            assert_eq!(h.betti, betti, "{} {bc:?}", s.name);
            assert_eq!(d.complex.ranks(), s.expected(bc).unwrap(), "{} {bc:?}", s.name);
            let ineq = morse_inequalities(&d.counts, h.betti, bc);
            assert!(ineq.all_hold(), "{} {bc:?}: {ineq:?}", s.name);
        }
        let m = scenario_complex(&s, Absolute).counts.absolute();
        let chi = m[0] as i64 - m[1] as i64 + m[2] as i64;
        assert_eq!(chi, mesh.euler_characteristic(), "{}", s.name);
        assert_eq!(chi, morse_counts(&s.critical_points().unwrap()).euler_characteristic());
    }
}

/// Rebuilds the complex with the frame of the critical point at `at` negated.
fn flipped_complex(f: &MorseFunction, dom: &SurfaceDomain, a: f64, at: [f64; 2]) -> ThomSmaleComplex {
    let mut pts = find_critical_points(f, dom, GRID, TOL).unwrap().points;
    let p = pts.iter_mut().find(|p| near(p.location, at, 1e-7)).unwrap();
    p.frame[0] = [-p.frame[0][0], -p.frame[0][1]];
    let fld = adapted_field(f, dom, a, &pts).unwrap();
    build_thom_smale_complex(&fld, &ConnectionOptions::default()).unwrap().0
}

#[test]
fn frame_flip_negates_connections() {
    let (f, dom) = saddle();
    let base = morse_complex(&f, &dom, Absolute, &settings(0.2)).unwrap().complex;
    let flip = flipped_complex(&f, &dom, 0.2, [0.0, 0.0]);
    for (a, b) in base.boundary[0][0].iter().zip(&flip.boundary[0][0]) {
        assert_eq!(*a, -*b);
    }

    // 2 → 1 connections: interior maximum of -(|x|²/2 + 0.1x) to the C₋ point of index 1.
    let g = MorseFunction::quadratic("max", [[-1.0, 0.0], [0.0, -1.0]], [-0.1, 0.0], 0.0);
    let base = morse_complex(&g, &unit_disk(), Absolute, &settings(0.1)).unwrap().complex;
    assert_eq!(base.ranks(), [1, 1, 1]);
    let n = base.boundary[1][0][0];
    assert_eq!(n.abs(), 1);
    let top = find(&base.generators[2], [-0.1, 0.0]).location;
    assert_eq!(flipped_complex(&g, &unit_disk(), 0.1, top).boundary[1][0][0], -n);
    let side = base.generators[1][0].location;
    assert_eq!(flipped_complex(&g, &unit_disk(), 0.1, side).boundary[1][0][0], -n);
}

#[test]
fn relative_complex_reflects_degrees() {
    let s = find_scenario("disk_saddle").unwrap();
    let abs = scenario_complex(&s, Absolute).complex;
    let rel = scenario_complex(&s, Relative).complex;
    assert_eq!(rel.mode, Relative);
    assert_eq!(rel.ranks(), [0, 1, 2]);
    assert_eq!(homology_ranks(&rel).betti, [0, 0, 1]);
    assert_eq!(abs.ranks(), [2, 1, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linear_functions_in_any_direction(th in 0.0f64..std::f64::consts::TAU, ring in any::<bool>()) {
        let f = MorseFunction::linear("dir", [th.cos(), th.sin()]);
        let (dom, betti, a) = if ring {
            (SurfaceDomain::annulus([0.0, 0.0], 0.5, 1.0).unwrap(), [1, 1, 0], 0.05)
        } else {
            (unit_disk(), [1, 0, 0], 0.1)
        };
        let d = morse_complex(&f, &dom, Absolute, &settings(a)).unwrap();
        prop_assert!(d.complex.boundary_squared().iter().flatten().all(|&v| v == 0));
        prop_assert_eq!(homology_ranks(&d.complex).betti, betti);
        prop_assert_eq!(d.counts.euler_characteristic(), dom.euler_characteristic());
        prop_assert!(morse_inequalities(&d.counts, betti, Absolute).all_hold());
    }

    #[test]
    fn smith_rank_matches_elimination(rows in prop::collection::vec(prop::collection::vec(-3i64..4, 3), 1..4)) {
        let k = smith_invariants(&rows).len();
        prop_assert_eq!(k, float_rank(&rows));
    }
}

fn float_rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let (nr, nc) = (a.len(), a[0].len());
    let mut rank = 0;
    for c in 0..nc {
        let Some(piv) = (rank..nr).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else { break };
        if a[piv][c].abs() < 1e-9 {
            continue;
        }
        a.swap(rank, piv);
        for r in 0..nr {
            if r != rank {
                let s = a[r][c] / a[rank][c];
                for cc in 0..nc {
                    a[r][cc] -= s * a[rank][cc];
                }
            }
        }
        rank += 1;
    }
    rank
}
