use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{CriticalKind, CriticalPoint, MorseFunction};
use crate::error::{Error, Result};
use crate::geometry::{Projection, SurfaceDomain};

/// Pseudo-gradient field adapted to the boundary.
///
/// X = -∇f + φ(d/δ)·m·ν_in, where d is the distance to the boundary, ν_in
/// the inward normal of the closest boundary point and
/// m = max(-∂_ν f, 0) + ε·η·|∇_t f|²/|∇f|. The first term of m cancels the
/// outward component of -∇f on the boundary; the second pushes strictly
/// inward except in a core of radius a around each C₋ point (η = 0 there),
/// where X is tangent to the boundary. X agrees with -∇f at distance ≥ δ.
#[derive(Clone, Debug)]
pub struct PseudoGradientField {
    pub f: MorseFunction,
    pub domain: SurfaceDomain,
    /// Adaptation radius a.
    pub a: f64,
    /// Width δ of the boundary layer where X is modified.
    pub delta: f64,
    pub epsilon: f64,
    pub criticals: Vec<CriticalPoint>,
    /// Indices into `criticals` of the zeros of X (interior and C₋ points).
    pub zeros: Vec<usize>,
    c_minus: Vec<[f64; 2]>,
    samples: Vec<(usize, f64, [f64; 2])>,
    sample_step: f64,
    sample_gap: f64,
}

const SAMPLES_PER_LOOP: usize = 256;
const EPSILON: f64 = 0.2;

/// Builds the adapted field. Critical balls of radius 4a must be pairwise
/// disjoint and interior ones must stay clear of the boundary.
pub fn adapted_field(f: &MorseFunction, domain: &SurfaceDomain, a: f64, criticals: &[CriticalPoint]) -> Result<PseudoGradientField> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Configuration(format!("adaptation radius {a} must be positive")));
    }
    for (i, p) in criticals.iter().enumerate() {
        for q in &criticals[i + 1..] {
            let d = (p.location[0] - q.location[0]).hypot(p.location[1] - q.location[1]);
            if d <= 8.0 * a {
                return Err(Error::Configuration(format!(
                    "critical balls of radius 4a = {} around {:?} and {:?} overlap",
                    4.0 * a,
                    p.location,
                    q.location
                )));
            }
        }
        if p.kind == CriticalKind::Interior && domain.project(p.location).signed_distance <= 4.0 * a {
            return Err(Error::Configuration(format!("ball of radius 4a around {:?} meets the boundary", p.location)));
        }
    }
    if 2.0 * a >= 0.5 * domain.feature_size() {
        return Err(Error::Configuration(format!("adaptation radius {a} too large for the domain")));
    }
    let mut samples = Vec::new();
    let mut sample_gap: f64 = 0.0;
    for (li, lp) in domain.loops.iter().enumerate() {
        for i in 0..SAMPLES_PER_LOOP {
            let t = TAU * i as f64 / SAMPLES_PER_LOOP as f64;
            let p = lp.point(t);
            let q = lp.point(TAU * (i + 1) as f64 / SAMPLES_PER_LOOP as f64);
            sample_gap = sample_gap.max((p[0] - q[0]).hypot(p[1] - q[1]));
            samples.push((li, t, p));
        }
    }
    let zeros = (0..criticals.len()).filter(|&i| criticals[i].is_generator()).collect();
    let c_minus = criticals.iter().filter(|c| c.kind == CriticalKind::BoundaryMinus).map(|c| c.location).collect();
    Ok(PseudoGradientField {
        f: f.clone(),
        domain: domain.clone(),
        a,
        delta: 2.0 * a,
        epsilon: EPSILON,
        criticals: criticals.to_vec(),
        zeros,
        c_minus,
        samples,
        sample_step: TAU / SAMPLES_PER_LOOP as f64,
        sample_gap,
    })
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

impl PseudoGradientField {
    /// Boundary projection, or None when p is certainly farther than δ
    /// from the boundary.
    pub fn boundary_near(&self, p: [f64; 2]) -> Option<Projection> {
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for &(li, t, q) in &self.samples {
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 {
                best = (d, li, t);
            }
        }
        if best.0 - self.sample_gap > self.delta {
            return None;
        }
        Some(self.domain.project_near(p, best.1, best.2, self.sample_step))
    }

    /// Cutoff in the C₋ cores: 0 within a, 1 beyond 2a.
    fn eta(&self, p: [f64; 2]) -> f64 {
        self.c_minus
            .iter()
            .map(|c| smoothstep(((c[0] - p[0]).hypot(c[1] - p[1]) - self.a) / self.a))
            .fold(1.0, f64::min)
    }

    fn phi(&self, d: f64) -> f64 {
        let s = d / self.delta;
        if s < 0.0 {
            1.0 - 2.0 * s
        } else if s < 1.0 {
            (1.0 - s) * (1.0 - s)
        } else {
            0.0
        }
    }

    pub fn value(&self, p: [f64; 2]) -> [f64; 2] {
        let g = self.f.gradient(p);
        let Some(pr) = self.boundary_near(p) else {
            return [-g[0], -g[1]];
        };
        let phi = self.phi(pr.signed_distance);
        if phi == 0.0 {
            return [-g[0], -g[1]];
        }
        let n = pr.normal;
        let gn = g[0] * n[0] + g[1] * n[1];
        let gt2 = (g[0] * g[0] + g[1] * g[1] - gn * gn).max(0.0);
        let gnorm = g[0].hypot(g[1]).max(1e-300);
        let m = (-gn).max(0.0) + self.epsilon * self.eta(p) * gt2 / gnorm;
        [-g[0] - phi * m * n[0], -g[1] - phi * m * n[1]]
    }

    /// Central finite-difference Jacobian.
    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6 * self.domain.diameter();
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[c] += h;
            pm[c] -= h;
            let (xp, xm) = (self.value(pp), self.value(pm));
            for r in 0..2 {
                j[r][c] = (xp[r] - xm[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Samples the defining inequalities of the field.
    pub fn verify(&self, grid: usize) -> FieldCheck {
        let mut chk = FieldCheck::default();
        let balls: Vec<[f64; 2]> = self.zeros.iter().map(|&i| self.criticals[i].location).collect();
        let outside_balls = |p: [f64; 2], r: f64| balls.iter().all(|c| (c[0] - p[0]).hypot(c[1] - p[1]) > r);
        let [lo, hi] = self.domain.bounding_box;
        for i in 0..=grid {
            for j in 0..=grid {
                let p = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / grid as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / grid as f64,
                ];
                if !self.domain.inside(p) || !outside_balls(p, self.a) {
                    continue;
                }
                let x = self.value(p);
                let g = self.f.gradient(p);
                chk.interior_samples += 1;
                let xf = x[0] * g[0] + x[1] * g[1];
                chk.max_xf = chk.max_xf.max(xf);
                if xf >= 0.0 {
                    chk.xf_violations += 1;
                }
            }
        }
        for lp in &self.domain.loops {
            let n = 8 * grid;
            for k in 0..n {
                let t = TAU * k as f64 / n as f64;
                let p = lp.point(t);
                let nu = lp.normal(t);
                let x = self.value(p);
                let xn = x[0] * nu[0] + x[1] * nu[1];
                chk.boundary_samples += 1;
                let near_minus = self.c_minus.iter().any(|c| (c[0] - p[0]).hypot(c[1] - p[1]) < self.a);
                if near_minus {
                    chk.max_core_normal = chk.max_core_normal.max(xn.abs());
                    if xn.abs() > 1e-9 {
                        chk.tangency_violations += 1;
                    }
                } else if outside_balls(p, self.a) {
                    chk.max_boundary_normal = chk.max_boundary_normal.max(xn);
                    if xn >= 0.0 {
                        chk.inward_violations += 1;
                    }
                }
            }
        }
        chk
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Samples outside the critical balls with Xf ≥ 0.
    pub xf_violations: usize,
    /// Boundary samples outside the balls with X·ν ≥ 0.
    pub inward_violations: usize,
    /// Boundary samples inside a C₋ core with X not tangent.
    pub tangency_violations: usize,
    pub max_xf: f64,
    pub max_boundary_normal: f64,
    pub max_core_normal: f64,
}

impl Default for FieldCheck {
    fn default() -> Self {
        FieldCheck {
            interior_samples: 0,
            boundary_samples: 0,
            xf_violations: 0,
            inward_violations: 0,
            tangency_violations: 0,
            max_xf: f64::NEG_INFINITY,
            max_boundary_normal: f64::NEG_INFINITY,
            max_core_normal: 0.0,
        }
    }
}

impl FieldCheck {
    pub fn ok(&self) -> bool {
        self.xf_violations == 0 && self.inward_violations == 0 && self.tangency_violations == 0
    }
}
