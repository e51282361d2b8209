use wml_core::dec::{assemble, BoundaryCondition, WittenAssembly};
use wml_core::geometry::*;
use wml_core::model::*;
use wml_core::morse::*;
use wml_core::spectral::{ls_slope, solve_entry};

struct Setup {
    domain: SurfaceDomain,
    f: MorseFunction,
    points: Vec<CriticalPoint>,
    mesh: TriMesh,
    asm: WittenAssembly,
}

fn setup(domain: SurfaceDomain, f: MorseFunction, h: f64) -> Setup {
    let points = find_critical_points(&f, &domain, 40, 1e-9).unwrap().points;
    let opts = MeshOptions {
        boundary_features: points.iter().filter_map(|p| p.boundary).collect(),
        interior_features: points.iter().filter(|p| p.kind == CriticalKind::Interior).map(|p| p.location).collect(),
        ..Default::default()
    };
    let mesh = build_mesh_with(&domain, h, &opts).unwrap();
    let asm = assemble(&mesh, &f, BoundaryCondition::Absolute).unwrap();
    Setup { domain, f, points, mesh, asm }
}

fn disk_linear(h: f64) -> Setup {
    setup(SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap(), MorseFunction::linear("x", [1.0, 0.0]), h)
}

fn generator(s: &Setup, index: usize) -> CriticalPoint {
    s.points.iter().find(|p| p.is_generator() && p.index == index).unwrap().clone()
}

#[test]
fn boundary_quasimode_decays_and_bounds_the_spectrum() {
    let s = disk_linear(0.1);
    let p = generator(&s, 0);
    let mut pts = Vec::new();
    let mut prev = f64::INFINITY;
    for t in [4.0, 8.0, 16.0] {
        let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, t, 0.45).unwrap();
        let rq = quasimode_residual(&q, &s.asm, t).unwrap();
        let lam = solve_entry(&s.asm, t, 0, 2, 1e-9, 0).unwrap().eigenvalues[0];
        assert!(rq < prev, "T={t}: {rq} ≥ {prev}");
        assert!(lam <= 1.01 * rq);
        prev = rq;
        pts.push((t, rq.ln()));
    }
    assert!(ls_slope(&pts) < 0.0);
}

#[test]
fn boundary_profile_carries_the_normal_factor() {
    let s = disk_linear(0.05);
    let p = generator(&s, 0);
    let t = 8.0;
    let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, t, 0.45).unwrap();
    // In the plateau the profile is e^{-T x'²/2 - T x_n} = e^{-T(f - f(p))} exactly.
    let v0 = s.mesh.vertices.iter().position(|v| (v[0] + 1.0).hypot(v[1]) < 1e-12).unwrap();
    let mut checked = 0;
    for (i, v) in s.mesh.vertices.iter().enumerate() {
        if (v[0] + 1.0).hypot(v[1]) < 0.3 {
            let ratio = q.cochain.values[i] / q.cochain.values[v0];
            let expect = (-t * (v[0] + 1.0)).exp();
            assert!((ratio / expect - 1.0).abs() < 1e-12, "ratio {ratio} vs {expect}");
            checked += 1;
        }
    }
    assert!(checked > 20);
    assert!(q.cochain.values[v0] > 0.0);
}

#[test]
fn interior_normalization_tends_to_gaussian_integral() {
    let s = setup(
        SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap(),
        MorseFunction::quadratic("m", [[1.0, 0.0], [0.0, 1.0]], [0.1, 0.0], 0.0),
        0.08,
    );
    let p = generator(&s, 0);
    let mut prev = f64::INFINITY;
    for t in [4.0, 8.0, 16.0, 32.0] {
        let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, t, 0.5).unwrap();
        let dev = (q.alpha * t / std::f64::consts::PI - 1.0).abs();
        assert!(dev < prev);
        prev = dev;
    }
    assert!(prev < 1e-3);
}

#[test]
fn interior_minimum_concentrates() {
    let s = setup(
        SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap(),
        MorseFunction::quadratic("m", [[1.0, 0.0], [0.0, 1.0]], [0.1, 0.0], 0.0),
        0.05,
    );
    let p = generator(&s, 0);
    let a = 0.3;
    for t in [8.0, 16.0, 32.0, 64.0] {
        let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, t, a).unwrap();
        assert!(q.tail_fraction <= 10.0 * (-t * a * a / 2.0).exp(), "T={t}: {}", q.tail_fraction);
        let m = s.asm.mass_free(0);
        let x = s.asm.restrict(0, &q.unit.values);
        let n: f64 = x.iter().zip(m.matvec(&x)).map(|(a, b)| a * b).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn support_stays_in_the_double_ball() {
    let s = disk_linear(0.05);
    let p = generator(&s, 0);
    let a = 0.3;
    let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, 8.0, a).unwrap();
    for (i, v) in s.mesh.vertices.iter().enumerate() {
        if q.cochain.values[i] != 0.0 {
            assert!((v[0] - p.location[0]).hypot(v[1] - p.location[1]) <= 2.0 * a + 1e-9);
        }
    }
}

#[test]
fn resolution_contract_is_enforced() {
    let s = disk_linear(0.1);
    let p = generator(&s, 0);
    assert!(matches!(
        quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, 64.0, 0.3),
        Err(wml_core::Error::Resolution(_))
    ));
}

#[test]
fn saddle_quasimode_bounds_degree_one() {
    let s = setup(
        SurfaceDomain::disk([0.0, 0.0], 2.0).unwrap(),
        MorseFunction::quadratic("s", [[2.0, 0.0], [0.0, -2.0]], [0.0, 0.0], 0.0),
        0.08,
    );
    let p = generator(&s, 1);
    let mut prev = f64::INFINITY;
    for t in [4.0, 8.0] {
        let q = quasimode(&s.asm, &s.mesh, &s.f, &s.domain, &p, t, 0.8).unwrap();
        let rq = quasimode_residual(&q, &s.asm, t).unwrap();
        let lam = solve_entry(&s.asm, t, 1, 2, 1e-9, 0).unwrap().eigenvalues[0];
        assert!(rq < prev && lam <= 1.01 * rq);
        prev = rq;
    }
}

#[test]
fn distinct_generators_are_orthogonal() {
    let s = setup(
        SurfaceDomain::disk([0.0, 0.0], 2.0).unwrap(),
        MorseFunction::quadratic("s", [[2.0, 0.0], [0.0, -2.0]], [0.0, 0.0], 0.0),
        0.1,
    );
    let mins: Vec<_> = s.points.iter().filter(|p| p.is_generator() && p.index == 0).cloned().collect();
    assert_eq!(mins.len(), 2);
    let m = s.asm.mass_free(0);
    for t in [4.0, 8.0, 16.0] {
        let q: Vec<_> = mins.iter().map(|p| quasimode(&s.asm, &s.mesh, &s.f, &s.domain, p, t, 0.8).unwrap()).collect();
        let x = s.asm.restrict(0, &q[0].unit.values);
        let y = s.asm.restrict(0, &q[1].unit.values);
        let ip: f64 = x.iter().zip(m.matvec(&y)).map(|(a, b)| a * b).sum();
        assert!(ip.abs() < 1e-14);
    }
}
