use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Analytic closed curve parametrized by an angle in [0, 2π).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoopShape {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// Star-shaped curve r(θ) = r0 + Σ_k (cos_k cos kθ + sin_k sin kθ), k ≥ 1.
    Polar { center: [f64; 2], r0: f64, cos: Vec<f64>, sin: Vec<f64> },
}

impl LoopShape {
    fn polar_r(r0: f64, cos: &[f64], sin: &[f64], th: f64, order: u32) -> f64 {
        let mut r = if order == 0 { r0 } else { 0.0 };
        for (k, (a, b)) in cos.iter().zip(sin.iter().chain(std::iter::repeat(&0.0))).enumerate() {
            let k = (k + 1) as f64;
            let (s, c) = (k * th).sin_cos();
            r += match order {
                0 => a * c + b * s,
                1 => k * (-a * s + b * c),
                _ => -k * k * (a * c + b * s),
            };
        }
        r
    }

    pub fn point(&self, th: f64) -> [f64; 2] {
        let (s, c) = th.sin_cos();
        match self {
            LoopShape::Circle { center, radius } => [center[0] + radius * c, center[1] + radius * s],
            LoopShape::Ellipse { center, semi_axes } => [center[0] + semi_axes[0] * c, center[1] + semi_axes[1] * s],
            LoopShape::Polar { center, r0, cos, sin } => {
                let r = Self::polar_r(*r0, cos, sin, th, 0);
                [center[0] + r * c, center[1] + r * s]
            }
        }
    }

    pub fn d1(&self, th: f64) -> [f64; 2] {
        let (s, c) = th.sin_cos();
        match self {
            LoopShape::Circle { radius, .. } => [-radius * s, radius * c],
            LoopShape::Ellipse { semi_axes, .. } => [-semi_axes[0] * s, semi_axes[1] * c],
            LoopShape::Polar { r0, cos, sin, .. } => {
                let r = Self::polar_r(*r0, cos, sin, th, 0);
                let dr = Self::polar_r(*r0, cos, sin, th, 1);
                [dr * c - r * s, dr * s + r * c]
            }
        }
    }

    pub fn d2(&self, th: f64) -> [f64; 2] {
        let (s, c) = th.sin_cos();
        match self {
            LoopShape::Circle { radius, .. } => [-radius * c, -radius * s],
            LoopShape::Ellipse { semi_axes, .. } => [-semi_axes[0] * c, -semi_axes[1] * s],
            LoopShape::Polar { r0, cos, sin, .. } => {
                let r = Self::polar_r(*r0, cos, sin, th, 0);
                let dr = Self::polar_r(*r0, cos, sin, th, 1);
                let ddr = Self::polar_r(*r0, cos, sin, th, 2);
                [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s]
            }
        }
    }

    /// Negative inside the region bounded by the curve, positive outside.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        match self {
            LoopShape::Circle { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1])) - radius,
            LoopShape::Ellipse { center, semi_axes } => {
                let x = (p[0] - center[0]) / semi_axes[0];
                let y = (p[1] - center[1]) / semi_axes[1];
                (x.hypot(y) - 1.0) * semi_axes[0].min(semi_axes[1])
            }
            LoopShape::Polar { center, r0, cos, sin } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let th = dy.atan2(dx);
                dx.hypot(dy) - Self::polar_r(*r0, cos, sin, th, 0)
            }
        }
    }
}

/// A boundary curve with its traversal direction. Loops are traversed with
/// the domain on the left: the outer loop counterclockwise, holes clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub shape: LoopShape,
    pub ccw: bool,
}

impl BoundaryLoop {
    fn sigma(&self) -> f64 {
        if self.ccw {
            1.0
        } else {
            -1.0
        }
    }

    pub fn period(&self) -> f64 {
        TAU
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        self.shape.point(self.sigma() * t)
    }

    pub fn derivative(&self, t: f64) -> [f64; 2] {
        let d = self.shape.d1(self.sigma() * t);
        [self.sigma() * d[0], self.sigma() * d[1]]
    }

    pub fn second_derivative(&self, t: f64) -> [f64; 2] {
        self.shape.d2(self.sigma() * t)
    }

    pub fn unit_tangent(&self, t: f64) -> [f64; 2] {
        let d = self.derivative(t);
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    }

    /// Outward normal by orientation convention (right of the tangent).
    pub fn normal(&self, t: f64) -> [f64; 2] {
        let u = self.unit_tangent(t);
        [u[1], -u[0]]
    }

    pub fn length(&self) -> f64 {
        arc_length_table(self, 2048).last().copied().unwrap_or(0.0)
    }

    /// Signed curvature of the traversal (positive when turning left).
    pub fn curvature(&self, t: f64) -> f64 {
        let d = self.derivative(t);
        let dd = self.second_derivative(t);
        (d[0] * dd[1] - d[1] * dd[0]) / d[0].hypot(d[1]).powi(3)
    }
}

/// Cumulative arc length at `n+1` equispaced parameters (Simpson per cell).
pub fn arc_length_table(lp: &BoundaryLoop, n: usize) -> Vec<f64> {
    let dt = lp.period() / n as f64;
    let speed = |t: f64| {
        let d = lp.derivative(t);
        d[0].hypot(d[1])
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..n {
        let a = i as f64 * dt;
        acc += dt / 6.0 * (speed(a) + 4.0 * speed(a + 0.5 * dt) + speed(a + dt));
        out.push(acc);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub loop_index: usize,
    pub param: f64,
    pub point: [f64; 2],
    /// Positive inside the domain.
    pub signed_distance: f64,
    pub normal: [f64; 2],
}

/// Planar region bounded by disjoint analytic loops; loop 0 is the outer one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDomain {
    pub loops: Vec<BoundaryLoop>,
    pub bounding_box: [[f64; 2]; 2],
}

const SAMPLES: usize = 512;

impl SurfaceDomain {
    pub fn new(loops: Vec<BoundaryLoop>) -> Result<Self> {
        if loops.is_empty() {
            return Err(Error::DomainInvalid("no boundary loops".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for i in 0..SAMPLES {
            let p = loops[0].point(TAU * i as f64 / SAMPLES as f64);
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let pad = 1e-3 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let d = SurfaceDomain {
            loops,
            bounding_box: [[lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]],
        };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::DomainInvalid(format!("radius {radius} must be positive")));
        }
        Self::new(vec![BoundaryLoop { shape: LoopShape::Circle { center, radius }, ccw: true }])
    }

    pub fn annulus(center: [f64; 2], inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::DomainInvalid(format!("annulus radii ({inner}, {outer}) out of order")));
        }
        Self::new(vec![
            BoundaryLoop { shape: LoopShape::Circle { center, radius: outer }, ccw: true },
            BoundaryLoop { shape: LoopShape::Circle { center, radius: inner }, ccw: false },
        ])
    }

    pub fn diameter(&self) -> f64 {
        let [lo, hi] = self.bounding_box;
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    pub fn inside(&self, p: [f64; 2]) -> bool {
        self.loops[0].shape.level(p) < 0.0 && self.loops[1..].iter().all(|l| l.shape.level(p) > 0.0)
    }

    /// Euler characteristic of the region: one minus the number of holes.
    pub fn euler_characteristic(&self) -> i64 {
        1 - (self.loops.len() as i64 - 1)
    }

    fn validate(&self) -> Result<()> {
        let eps = 1e-6 * self.diameter();
        for (li, lp) in self.loops.iter().enumerate() {
            if lp.ccw != (li == 0) {
                return Err(Error::DomainInvalid(format!(
                    "loop {li} must be traversed {}",
                    if li == 0 { "counterclockwise" } else { "clockwise" }
                )));
            }
            if let LoopShape::Polar { r0, cos, sin, .. } = &lp.shape {
                if cos.len() < sin.len() {
                    return Err(Error::DomainInvalid("polar loop needs at least as many cosine terms as sine terms".into()));
                }
                let bound: f64 = cos.iter().chain(sin).map(|c| c.abs()).sum();
                if bound >= *r0 {
                    return Err(Error::DomainInvalid("polar loop radius may vanish".into()));
                }
            }
            for i in 0..SAMPLES {
                let t = TAU * (i as f64 + 0.5) / SAMPLES as f64;
                let d = lp.derivative(t);
                if d[0].hypot(d[1]) < 1e-9 {
                    return Err(Error::DomainInvalid(format!("loop {li} has vanishing derivative at t={t}")));
                }
                let p = lp.point(t);
                let n = lp.normal(t);
                let pin = [p[0] - eps * n[0], p[1] - eps * n[1]];
                let pout = [p[0] + eps * n[0], p[1] + eps * n[1]];
                if !self.inside(pin) || self.inside(pout) {
                    return Err(Error::DomainInvalid(format!(
                        "inside test disagrees with loop {li} orientation at t={t}"
                    )));
                }
                for (lj, other) in self.loops.iter().enumerate() {
                    if lj == li {
                        continue;
                    }
                    let lev = other.shape.level(p);
                    let ok = if lj == 0 { lev < 0.0 } else { lev > 0.0 };
                    if !ok {
                        return Err(Error::DomainInvalid(format!("loops {li} and {lj} intersect or nest wrongly")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest of the boundary curvature radii and the inter-loop distances.
    pub fn feature_size(&self) -> f64 {
        let mut fs = f64::INFINITY;
        let n = 256;
        for lp in &self.loops {
            for i in 0..n {
                let k = lp.curvature(TAU * i as f64 / n as f64).abs();
                if k > 0.0 {
                    fs = fs.min(1.0 / k);
                }
            }
        }
        for i in 0..self.loops.len() {
            for j in i + 1..self.loops.len() {
                for a in 0..n {
                    let p = self.loops[i].point(TAU * a as f64 / n as f64);
                    for b in 0..n {
                        let q = self.loops[j].point(TAU * b as f64 / n as f64);
                        fs = fs.min((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
            }
        }
        fs
    }

    /// Closest point on the boundary; Newton refinement of a sampled guess.
    pub fn project(&self, p: [f64; 2]) -> Projection {
        let n = 256;
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for (li, lp) in self.loops.iter().enumerate() {
            for i in 0..n {
                let t = TAU * i as f64 / n as f64;
                let q = lp.point(t);
                let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                if d < best.0 {
                    best = (d, li, t);
                }
            }
        }
        self.project_near(p, best.1, best.2, TAU / n as f64)
    }

    /// Newton projection onto loop `li`, searching within `window` of the
    /// parameter guess `t0`.
    pub fn project_near(&self, p: [f64; 2], li: usize, t0: f64, window: f64) -> Projection {
        let lp = &self.loops[li];
        let mut t = t0;
        let (lo, hi) = (t0 - window, t0 + window);
        for _ in 0..30 {
            let q = lp.point(t);
            let d1 = lp.derivative(t);
            let d2 = lp.second_derivative(t);
            let r = [q[0] - p[0], q[1] - p[1]];
            let g = r[0] * d1[0] + r[1] * d1[1];
            let gp = d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1];
            let mut dt = if gp > 0.0 { -g / gp } else { -g / (d1[0] * d1[0] + d1[1] * d1[1]) };
            if !dt.is_finite() {
                break;
            }
            dt = dt.clamp(-window, window);
            t = (t + dt).clamp(lo, hi);
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let t = t.rem_euclid(TAU);
        let q = lp.point(t);
        let normal = lp.normal(t);
        let dist = (q[0] - p[0]).hypot(q[1] - p[1]);
        let s = if (p[0] - q[0]) * normal[0] + (p[1] - q[1]) * normal[1] > 0.0 { -1.0 } else { 1.0 };
        Projection { loop_index: li, param: t, point: q, signed_distance: s * dist, normal }
    }

    /// Outward unit normal, confirmed by probing the inside test on both sides.
    pub fn outward_normal(&self, loop_index: usize, param: f64) -> Result<[f64; 2]> {
        let lp = self
            .loops
            .get(loop_index)
            .ok_or_else(|| Error::InvalidInput(format!("no loop {loop_index}")))?;
        if !(param.is_finite() && (0.0..=TAU).contains(&param)) {
            return Err(Error::InvalidInput(format!("parameter {param} outside [0, 2π]")));
        }
        let n = lp.normal(param);
        let p = lp.point(param);
        let eps = 1e-7 * self.diameter();
        let out = self.inside([p[0] + eps * n[0], p[1] + eps * n[1]]);
        let inn = self.inside([p[0] - eps * n[0], p[1] - eps * n[1]]);
        match (inn, out) {
            (true, false) => Ok(n),
            (false, true) => Ok([-n[0], -n[1]]),
            _ => Err(Error::GeometricAmbiguity(format!(
                "normal probe at loop {loop_index}, t={param} is inconclusive"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_normals() {
        let d = SurfaceDomain::disk([0.0, 0.0], 1.0).unwrap();
        let n = d.outward_normal(0, 0.0).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-14 && n[1].abs() < 1e-14);
        let n = d.outward_normal(0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(n[0].abs() < 1e-14 && (n[1] - 1.0).abs() < 1e-14);
        let a = SurfaceDomain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
        let n = a.outward_normal(1, 0.0).unwrap();
        assert!((n[0] + 1.0).abs() < 1e-14 && n[1].abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_loops() {
        assert!(SurfaceDomain::disk([0.0, 0.0], 0.0).is_err());
        assert!(SurfaceDomain::annulus([0.0, 0.0], 1.0, 0.5).is_err());
        let bad = BoundaryLoop { shape: LoopShape::Circle { center: [0.0, 0.0], radius: 1.0 }, ccw: false };
        assert!(SurfaceDomain::new(vec![bad]).is_err());
    }

    #[test]
    fn projection_on_ellipse() {
        let d = SurfaceDomain::new(vec![BoundaryLoop {
            shape: LoopShape::Ellipse { center: [0.0, 0.0], semi_axes: [2.0, 1.0] },
            ccw: true,
        }])
        .unwrap();
        let pr = d.project([0.0, 0.5]);
        assert!((pr.point[1] - 1.0).abs() < 1e-10 && pr.point[0].abs() < 1e-8);
        assert!((pr.signed_distance - 0.5).abs() < 1e-10);
        let pr = d.project([2.5, 0.0]);
        assert!((pr.signed_distance + 0.5).abs() < 1e-10);
    }

    #[test]
    fn feature_sizes() {
        assert!((SurfaceDomain::disk([0.0, 0.0], 2.0).unwrap().feature_size() - 2.0).abs() < 1e-9);
        let a = SurfaceDomain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
        assert!((a.feature_size() - 0.5).abs() < 1e-6);
    }
}
