use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::dec::{BoundaryCondition, Cochain, WittenAssembly};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceDomain, TriMesh};
use crate::morse::{CriticalKind, CriticalPoint, MorseFunction};
use crate::spectral::RESOLUTION_CONTRACT;

/// Localized model kernel attached to a generator.
///
/// The cochain samples γ(|x|)·ρ/√α in a Morse chart x around the point,
/// where ρ is the Euclidean kernel e^{-T|x|²/2} dx₁∧…∧dx_j for interior points
/// and the half-space kernel e^{-T|x'|²/2 - T x_n} dx'^j for C₋ points, and
/// α = ∫ γ(|x|)² |ρ|² dx in chart measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Quasimode {
    pub point: CriticalPoint,
    pub degree: usize,
    pub t: f64,
    pub a: f64,
    pub alpha: f64,
    /// Chart-normalized cochain on the full complex.
    pub cochain: Cochain,
    /// The same cochain scaled to unit discrete norm.
    pub unit: Cochain,
    /// Mass fraction outside the chart ball of radius a.
    pub tail_fraction: f64,
}

/// C² cutoff: 1 on [0, a], 0 beyond 2a.
pub fn cutoff(r: f64, a: f64) -> f64 {
    let s = ((r - a) / a).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Coordinates in which f is exactly in normal form near a critical point.
///
/// Interior points use the Hessian chart x = |Λ|^{1/2} Qᵀ(y - p) with the
/// unstable directions first; it is exact for quadratic f. C₋ points use
/// x' = ±√(2|f(π y) - f(q)|) along the boundary and x_n = f(y) - f(π y),
/// where π is the closest-point projection, so that
/// f - f(q) = ±x'²/2 + x_n exactly.
#[derive(Clone, Debug)]
enum Chart {
    Interior { p: [f64; 2], axes: [[f64; 2]; 2] },
    Boundary { q: [f64; 2], loop_index: usize, param: f64, f_q: f64, orient: f64, reach: f64 },
}

impl Chart {
    fn new(p: &CriticalPoint, domain: &SurfaceDomain) -> Result<Chart> {
        match p.kind {
            CriticalKind::Interior => {
                let mut dirs: Vec<(f64, [f64; 2])> = p.frame.iter().map(|v| (eig_of(p, *v), *v)).collect();
                for &(l, v) in &p.curvatures {
                    if l > 0.0 {
                        dirs.push((l, v));
                    }
                }
                if dirs.len() != 2 {
                    return Err(Error::MorseViolation(format!("interior point {:?} lacks a full Hessian frame", p.location)));
                }
                let axes = [0, 1].map(|i| {
                    let s = dirs[i].0.abs().sqrt();
                    [s * dirs[i].1[0], s * dirs[i].1[1]]
                });
                Ok(Chart::Interior { p: p.location, axes })
            }
            CriticalKind::BoundaryMinus => {
                let (li, t0) = p.boundary.ok_or_else(|| Error::MorseViolation("boundary point without a loop parameter".into()))?;
                let lp = &domain.loops[li];
                let orient = match p.frame.first() {
                    Some(u) => {
                        let d = lp.derivative(t0);
                        if u[0] * d[0] + u[1] * d[1] >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    None => 1.0,
                };
                Ok(Chart::Boundary {
                    q: p.location,
                    loop_index: li,
                    param: t0,
                    f_q: p.f_value,
                    orient,
                    reach: 0.5 * domain.feature_size(),
                })
            }
            CriticalKind::BoundaryPlus => Err(Error::InvalidInput(format!(
                "{:?} is a C₊ point and carries no absolute quasimode",
                p.location
            ))),
        }
    }

    /// Chart coordinates, or None where the chart is not defined.
    fn coords(&self, y: [f64; 2], f: &MorseFunction, domain: &SurfaceDomain) -> Option<[f64; 2]> {
        match self {
            Chart::Interior { p, axes } => {
                let d = [y[0] - p[0], y[1] - p[1]];
                Some(axes.map(|a| a[0] * d[0] + a[1] * d[1]))
            }
            Chart::Boundary { q, loop_index, param, f_q, orient, reach } => {
                if (y[0] - q[0]).hypot(y[1] - q[1]) > *reach {
                    return None;
                }
                let lp = &domain.loops[*loop_index];
                let pr = domain.project_near(y, *loop_index, *param, 0.5 * lp.period());
                if pr.signed_distance < -1e-12 || pr.signed_distance > *reach {
                    return None;
                }
                let period = lp.period();
                let mut dt = (pr.param - param).rem_euclid(period);
                if dt > 0.5 * period {
                    dt -= period;
                }
                let fb = f.value(pr.point);
                let xt = orient * dt.signum() * (2.0 * (fb - f_q).abs()).sqrt();
                let xn = (f.value(y) - fb).max(0.0);
                Some([xt, xn])
            }
        }
    }
}

fn eig_of(p: &CriticalPoint, v: [f64; 2]) -> f64 {
    p.curvatures
        .iter()
        .max_by(|a, b| {
            let da = (a.1[0] * v[0] + a.1[1] * v[1]).abs();
            let db = (b.1[0] * v[0] + b.1[1] * v[1]).abs();
            da.total_cmp(&db)
        })
        .map(|c| c.0)
        .unwrap_or(0.0)
}

/// ∫₀^x e^{-T s²} ds.
fn gauss_primitive(x: f64, t: f64) -> f64 {
    0.5 * (PI / t).sqrt() * libm::erf(t.sqrt() * x)
}

/// α = ∫ γ² |ρ|² over the model domain, by tensor Simpson quadrature in
/// polar coordinates.
fn normalization(a: f64, t: f64, half_space: bool) -> f64 {
    let nr = 2000;
    let nphi = if half_space { 800 } else { 1 };
    let simpson = |i: usize, n: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    let hr = 2.0 * a / nr as f64;
    let mut total = 0.0;
    for i in 0..=nr {
        let r = i as f64 * hr;
        let g = cutoff(r, a);
        let w = simpson(i, nr) * hr / 3.0 * g * g * r;
        if !half_space {
            total += w * TAU * (-t * r * r).exp();
        } else {
            let hp = PI / nphi as f64;
            let mut s = 0.0;
            for k in 0..=nphi {
                let ph = k as f64 * hp;
                let (xt, xn) = (r * ph.cos(), r * ph.sin());
                s += simpson(k, nphi) * hp / 3.0 * (-t * xt * xt - 2.0 * t * xn).exp();
            }
            total += w * s;
        }
    }
    total
}

/// Builds the quasimode of a generator on the given mesh. Requires the
/// mesh to resolve the kernel width, h·√T ≤ 0.5.
pub fn quasimode(
    asm: &WittenAssembly,
    mesh: &TriMesh,
    f: &MorseFunction,
    domain: &SurfaceDomain,
    p: &CriticalPoint,
    t: f64,
    a: f64,
) -> Result<Quasimode> {
    if !(t > 0.0 && t.is_finite()) || !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("quasimode needs T > 0 and a > 0, got T={t}, a={a}")));
    }
    if mesh.h * t.sqrt() > RESOLUTION_CONTRACT {
        return Err(Error::Resolution(format!(
            "h·√T = {:.3} exceeds {RESOLUTION_CONTRACT}; refine the mesh",
            mesh.h * t.sqrt()
        )));
    }
    if !p.is_generator() {
        return Err(Error::InvalidInput(format!("{:?} is not a generator of the absolute complex", p.location)));
    }
    if asm.bc == BoundaryCondition::Relative && p.kind != CriticalKind::Interior {
        return Err(Error::InvalidInput("boundary quasimodes are built for the absolute complex only".into()));
    }
    let chart = Chart::new(p, domain)?;
    let half_space = p.kind == CriticalKind::BoundaryMinus;
    let j = p.index;
    let alpha = normalization(a, t, half_space);
    let scale = 1.0 / alpha.sqrt();
    let fp = p.f_value;
    // Chart coordinates per vertex; None outside the chart or the support.
    let xs: Vec<Option<[f64; 2]>> = mesh.vertices.iter().map(|&v| chart.coords(v, f, domain)).collect();
    let radius = |x: &Option<[f64; 2]>| x.map(|x| x[0].hypot(x[1])).unwrap_or(f64::INFINITY);
    let weight = |fv: f64| -> Result<f64> {
        let e = -t * (fv - fp);
        if e > crate::dec::MAX_EXPONENT {
            return Err(Error::Overflow { exponent: e });
        }
        Ok(e.exp())
    };
    let mut values = vec![0.0; mesh.n_simplices(j)];
    match j {
        0 => {
            // γ·e^{-T(f - f(p))}: in the exact chart this is the kernel itself.
            for (i, x) in xs.iter().enumerate() {
                let g = cutoff(radius(x), a);
                if g > 0.0 {
                    values[i] = scale * g * weight(asm.f_bary[0][i])?;
                }
            }
        }
        1 => {
            // γ·e^{-T(f - f(p))}·e^{-T x₁²} dx₁, with the closed factor
            // e^{-T x₁²} dx₁ integrated exactly along each edge.
            for (e, &[u, v]) in mesh.edges.iter().enumerate() {
                let (Some(xu), Some(xv)) = (xs[u], xs[v]) else { continue };
                let mid = chart.coords(mesh.barycenter(1, e), f, domain);
                let g = cutoff(radius(&mid), a);
                if g > 0.0 {
                    let dpsi = gauss_primitive(xv[0], t) - gauss_primitive(xu[0], t);
                    values[e] = scale * g * weight(asm.f_bary[1][e])? * dpsi;
                }
            }
        }
        _ => {
            // Interior maximum: e^{-T|x|²/2} dx₁∧dx₂ at the centroid.
            for (k, tri) in mesh.triangles.iter().enumerate() {
                let c = mesh.barycenter(2, k);
                let Some(xc) = chart.coords(c, f, domain) else { continue };
                let g = cutoff(xc[0].hypot(xc[1]), a);
                if g == 0.0 {
                    continue;
                }
                let [Some(x0), Some(x1), Some(x2)] = tri.map(|v| xs[v]) else { continue };
                let area = 0.5 * ((x1[0] - x0[0]) * (x2[1] - x0[1]) - (x2[0] - x0[0]) * (x1[1] - x0[1]));
                values[k] = scale * g * (-0.5 * t * (xc[0] * xc[0] + xc[1] * xc[1])).exp() * area;
            }
        }
    }
    let values = asm.extend(j, &asm.restrict(j, &values));
    let free = asm.restrict(j, &values);
    let mf = asm.mass_free(j);
    let norm2 = crate::sparse::dot(&free, &mf.matvec(&free));
    if !(norm2 > 0.0) {
        return Err(Error::Resolution(format!(
            "quasimode at {:?} has no support on the mesh; a = {a} is below the mesh scale",
            p.location
        )));
    }
    // Mass outside the plateau |x| ≤ a, from the diagonal of the mass matrix.
    let inner: Vec<f64> = (0..values.len())
        .map(|k| {
            let r = match j {
                0 => radius(&xs[k]),
                _ => radius(&chart.coords(mesh.barycenter(j, k), f, domain)),
            };
            if r <= a {
                0.0
            } else {
                values[k]
            }
        })
        .collect();
    let outer = asm.restrict(j, &inner);
    let tail_fraction = crate::sparse::dot(&outer, &mf.matvec(&outer)).max(0.0) / norm2;
    let inv = 1.0 / norm2.sqrt();
    let unit = values.iter().map(|v| v * inv).collect();
    Ok(Quasimode {
        point: p.clone(),
        degree: j,
        t,
        a,
        alpha,
        cochain: Cochain { degree: j, values },
        unit: Cochain { degree: j, values: unit },
        tail_fraction,
    })
}

/// Rayleigh quotient of D_T² at the unit quasimode.
pub fn quasimode_residual(q: &Quasimode, asm: &WittenAssembly, t: f64) -> Result<f64> {
    let form = asm.witten_quadratic_form(t, q.degree)?;
    let x = asm.restrict(q.degree, &q.unit.values);
    let m = asm.mass_free(q.degree);
    let den = crate::sparse::dot(&x, &m.matvec(&x));
    Ok(form.quadratic(&x) / den)
}
