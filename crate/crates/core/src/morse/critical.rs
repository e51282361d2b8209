use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::MorseFunction;
use crate::error::{Error, Result};
use crate::geometry::SurfaceDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriticalKind {
    Interior,
    /// Critical point of f on the boundary with νf < 0.
    BoundaryMinus,
    /// Critical point of f on the boundary with νf > 0.
    BoundaryPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: [f64; 2],
    pub kind: CriticalKind,
    /// Morse index of f (interior) or of f restricted to the boundary.
    pub index: usize,
    pub f_value: f64,
    /// Unstable directions of the descending flow, sign-normalized.
    pub frame: Vec<[f64; 2]>,
    /// Loop index and parameter for boundary kinds.
    pub boundary: Option<(usize, f64)>,
    /// Hessian eigenvalues (ascending) with unit eigenvectors for interior
    /// points; the arclength second derivative of f along the loop with the
    /// unit tangent for boundary points.
    pub curvatures: Vec<(f64, [f64; 2])>,
    /// Outward normal derivative νf for boundary points.
    pub normal_derivative: Option<f64>,
}

impl CriticalPoint {
    /// Whether the point generates the absolute Thom-Smale complex.
    pub fn is_generator(&self) -> bool {
        self.kind != CriticalKind::BoundaryPlus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalScan {
    pub points: Vec<CriticalPoint>,
    /// Seeds near a local minimum of |∇f| whose Newton iteration failed.
    pub diagnostics: Vec<String>,
}

/// Tallies c_j (interior), p_j (C₋) and q_j (C₊).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseCounts {
    pub c: [usize; 3],
    pub p: [usize; 2],
    pub q: [usize; 2],
}

impl MorseCounts {
    /// c_j + p_j.
    pub fn absolute(&self) -> [usize; 3] {
        [self.c[0] + self.p[0], self.c[1] + self.p[1], self.c[2]]
    }

    /// c_j + q_{j-1}.
    pub fn relative(&self) -> [usize; 3] {
        [self.c[0], self.c[1] + self.q[0], self.c[2] + self.q[1]]
    }

    pub fn euler_characteristic(&self) -> i64 {
        let a = self.absolute();
        a[0] as i64 - a[1] as i64 + a[2] as i64
    }
}

pub fn morse_counts(points: &[CriticalPoint]) -> MorseCounts {
    let mut m = MorseCounts::default();
    for p in points {
        match p.kind {
            CriticalKind::Interior => m.c[p.index] += 1,
            CriticalKind::BoundaryMinus => m.p[p.index] += 1,
            CriticalKind::BoundaryPlus => m.q[p.index] += 1,
        }
    }
    m
}

/// Smallest |det H| or |f''| accepted as nondegenerate.
const DEGENERACY: f64 = 1e-9;

fn sym_eigen2(h: [[f64; 2]; 2]) -> [(f64, [f64; 2]); 2] {
    let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mean - rad, mean + rad);
    let vec = |l: f64| -> [f64; 2] {
        let v = if b.abs() > 1e-300 {
            [b, l - a]
        } else if (a - l).abs() <= (c - l).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let v1 = vec(l1);
    let v2 = if rad == 0.0 { [-v1[1], v1[0]] } else { vec(l2) };
    [(l1, v1), (l2, v2)]
}

/// Sign convention for frame vectors: first component positive, ties broken
/// by the second.
pub fn normalize_direction(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    let v = [v[0] / n, v[1] / n];
    let v = if v[0] > 1e-12 || (v[0].abs() <= 1e-12 && v[1] > 0.0) { v } else { [-v[0], -v[1]] };
    // Adding 0.0 turns -0.0 into 0.0.
    [v[0] + 0.0, v[1] + 0.0]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn interior_newton(f: &MorseFunction, mut x: [f64; 2], max_step: f64) -> Option<[f64; 2]> {
    for _ in 0..60 {
        let g = f.gradient(x);
        if norm(g) < 1e-14 {
            return Some(x);
        }
        let h = f.hessian(x);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let mut dx = [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(-h[1][0] * g[0] + h[0][0] * g[1]) / det];
        let len = norm(dx);
        if len > max_step {
            dx = [dx[0] * max_step / len, dx[1] * max_step / len];
        }
        x = [x[0] + dx[0], x[1] + dx[1]];
        if !(x[0].is_finite() && x[1].is_finite()) {
            return None;
        }
        if len < 1e-15 * (1.0 + norm(x)) {
            return Some(x);
        }
    }
    Some(x)
}

/// Locates critical points of f in the interior and of f restricted to
/// each boundary loop.
///
/// Interior points come from Newton iterations seeded on a grid with
/// `grid_density` cells across the domain diameter; points are kept when
/// |∇f| ≤ tol. Boundary points are bracketed by sign changes of the
/// tangential derivative on a fine loop sampling and polished by bisection.
pub fn find_critical_points(f: &MorseFunction, domain: &SurfaceDomain, grid_density: usize, tol: f64) -> Result<CriticalScan> {
    if grid_density < 2 || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("grid density {grid_density} or tolerance {tol} invalid")));
    }
    let diam = domain.diameter();
    let spacing = diam / grid_density as f64;
    let [lo, hi] = domain.bounding_box;
    let nx = ((hi[0] - lo[0]) / spacing).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / spacing).ceil() as usize + 1;
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut diagnostics = Vec::new();
    let seed = |i: usize, j: usize| [lo[0] + i as f64 * spacing, lo[1] + j as f64 * spacing];
    let gnorm = |i: usize, j: usize| {
        let p = seed(i, j);
        if domain.inside(p) {
            Some(norm(f.gradient(p)))
        } else {
            None
        }
    };
    let grid: Vec<Vec<Option<f64>>> = (0..nx).map(|i| (0..ny).map(|j| gnorm(i, j)).collect()).collect();
    for i in 0..nx {
        for j in 0..ny {
            let Some(g0) = grid[i][j] else { continue };
            let local_min = (i > 0 && j > 0 && i + 1 < nx && j + 1 < ny)
                && (-1i64..=1).all(|di| {
                    (-1i64..=1).all(|dj| {
                        (di == 0 && dj == 0)
                            || grid[(i as i64 + di) as usize][(j as i64 + dj) as usize].is_some_and(|g| g > g0)
                    })
                });
            let p0 = seed(i, j);
            let root = interior_newton(f, p0, 4.0 * spacing);
            let accepted = root.filter(|r| domain.inside(*r) && norm(f.gradient(*r)) <= tol);
            match accepted {
                Some(r) => {
                    if points.iter().any(|q| norm([q.location[0] - r[0], q.location[1] - r[1]]) < 1e-7 * diam) {
                        continue;
                    }
                    let dist = domain.project(r).signed_distance;
                    if dist < spacing.min(1e-6 * diam) {
                        return Err(Error::MorseViolation(format!("critical point of f at {r:?} lies on the boundary")));
                    }
                    let h = f.hessian(r);
                    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                    let eig = sym_eigen2(h);
                    // A root located to within tol/|λ_min| is only trustworthy
                    // when that is below √tol.
                    let (lmin, lmax) = (eig[0].0.abs().min(eig[1].0.abs()), eig[0].0.abs().max(eig[1].0.abs()));
                    if det.abs() < DEGENERACY || lmin < tol.sqrt() * lmax {
                        return Err(Error::MorseViolation(format!("degenerate Hessian (det {det:e}) at {r:?}")));
                    }
                    let index = eig.iter().filter(|e| e.0 < 0.0).count();
                    // Unstable directions of -∇f are the negative Hessian directions,
                    // ordered by the eigenvalue of the linearization -H.
                    let frame = eig.iter().rev().filter(|e| e.0 < 0.0).map(|e| normalize_direction(e.1)).collect();
                    points.push(CriticalPoint {
                        location: r,
                        kind: CriticalKind::Interior,
                        index,
                        f_value: f.value(r),
                        frame,
                        boundary: None,
                        curvatures: eig.iter().map(|e| (e.0, normalize_direction(e.1))).collect(),
                        normal_derivative: None,
                    });
                }
                None if local_min => {
                    diagnostics.push(format!("Newton from seed {p0:?} (|∇f| = {g0:.3e}, local minimum) did not converge"))
                }
                None => {}
            }
        }
    }
    for (li, lp) in domain.loops.iter().enumerate() {
        let n = (8 * grid_density).max(512);
        let ts: Vec<f64> = (0..=n).map(|i| TAU * i as f64 / n as f64).collect();
        let tangential = |t: f64| {
            let g = f.gradient(lp.point(t));
            let d = lp.derivative(t);
            g[0] * d[0] + g[1] * d[1]
        };
        for &t in &ts {
            let g = f.gradient(lp.point(t));
            if norm(g) < tol.max(1e-8) {
                return Err(Error::MorseViolation(format!("∇f vanishes on boundary loop {li} at t = {t}")));
            }
        }
        let vals: Vec<f64> = ts.iter().map(|&t| tangential(t)).collect();
        for k in 0..n {
            let (mut a, mut b) = (ts[k], ts[k + 1]);
            let (mut fa, fb) = (vals[k], vals[k + 1]);
            if fa == 0.0 {
                b = a;
            } else if fb == 0.0 || fa * fb > 0.0 {
                // an exact zero at b is picked up by the next bracket (or by k = 0 for t = 2π)
                continue;
            } else {
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let fm = tangential(m);
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
            }
            let t = (0.5 * (a + b)).rem_euclid(TAU);
            let x = lp.point(t);
            let d1 = lp.derivative(t);
            let d2 = lp.second_derivative(t);
            let g = f.gradient(x);
            let h = f.hessian(x);
            let speed2 = d1[0] * d1[0] + d1[1] * d1[1];
            let hdd = d1[0] * (h[0][0] * d1[0] + h[0][1] * d1[1]) + d1[1] * (h[1][0] * d1[0] + h[1][1] * d1[1]);
            let second = (hdd + g[0] * d2[0] + g[1] * d2[1]) / speed2;
            if second.abs() < DEGENERACY {
                return Err(Error::MorseViolation(format!("f restricted to loop {li} is degenerate at t = {t}")));
            }
            let nu = domain.outward_normal(li, t)?;
            let nuf = g[0] * nu[0] + g[1] * nu[1];
            let index = usize::from(second < 0.0);
            let tangent = normalize_direction(lp.unit_tangent(t));
            points.push(CriticalPoint {
                location: x,
                kind: if nuf < 0.0 { CriticalKind::BoundaryMinus } else { CriticalKind::BoundaryPlus },
                index,
                f_value: f.value(x),
                frame: if index == 1 { vec![tangent] } else { vec![] },
                boundary: Some((li, t)),
                curvatures: vec![(second, tangent)],
                normal_derivative: Some(nuf),
            });
        }
    }
    points.sort_by(|a, b| {
        (a.index, a.kind)
            .cmp(&(b.index, b.kind))
            .then(a.location[0].total_cmp(&b.location[0]))
            .then(a.location[1].total_cmp(&b.location[1]))
    });
    Ok(CriticalScan { points, diagnostics })
}
