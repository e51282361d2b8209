use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::flow::{trace_flow, Direction, FlowLimit, FlowLine, FlowOptions};
use super::{CriticalKind, PseudoGradientField};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CellGeometry {
    Point([f64; 2]),
    /// Polyline from the end of the negative branch through the critical
    /// point to the end of the positive branch.
    Curve(Vec<[f64; 2]>),
    /// Counterclockwise triangles of the flow-out fan.
    Patch(Vec<[[f64; 2]; 3]>),
}

/// Closure of the unstable manifold of a zero of X, oriented by its frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnstableCell {
    /// Index into the field's critical list.
    pub critical: usize,
    pub dim: usize,
    pub frame: Vec<[f64; 2]>,
    /// Sign of det(frame) for 2-cells; +1 otherwise.
    pub orientation: f64,
    pub geometry: CellGeometry,
    /// For curves: the negative and positive branches, each starting at the
    /// critical point.
    pub branches: Vec<FlowLine>,
}

impl UnstableCell {
    /// Limits of the (negative, positive) branches of a 1-cell.
    pub fn branch_limits(&self) -> Option<(FlowLimit, FlowLimit)> {
        (self.branches.len() == 2).then(|| (self.branches[0].limit, self.branches[1].limit))
    }

    pub fn area(&self) -> f64 {
        match &self.geometry {
            CellGeometry::Patch(tris) => tris.iter().map(|t| crate::geometry::triangle_area(t[0], t[1], t[2])).sum(),
            _ => 0.0,
        }
    }

    /// Copy with every frame vector negated; flips the orientation of 1-cells
    /// and of 2-cells with an odd number of vectors.
    pub fn reversed(&self) -> UnstableCell {
        let mut c = self.clone();
        if c.dim == 1 {
            c.frame = vec![[-c.frame[0][0], -c.frame[0][1]]];
            c.branches.reverse();
            if let CellGeometry::Curve(pts) = &mut c.geometry {
                pts.reverse();
            }
        } else if c.dim == 2 {
            c.frame[0] = [-c.frame[0][0], -c.frame[0][1]];
            c.orientation = -c.orientation;
        }
        c
    }
}

fn eig2(j: [[f64; 2]; 2]) -> Option<[(f64, [f64; 2]); 2]> {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let vecfor = |l: f64| {
        let (a, b) = ([j[0][1], l - j[0][0]], [l - j[1][1], j[1][0]]);
        let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
        let n = v[0].hypot(v[1]);
        if n < 1e-300 {
            if (j[0][0] - l).abs() < (j[1][1] - l).abs() { [1.0, 0.0] } else { [0.0, 1.0] }
        } else {
            [v[0] / n, v[1] / n]
        }
    };
    let (l1, l2) = (0.5 * tr - r, 0.5 * tr + r);
    Some([(l1, vecfor(l1)), (l2, vecfor(l2))])
}

/// Checks that the linearization of X at the zero `p` is hyperbolic with
/// the expected number of unstable directions, aligned with the frame.
pub fn check_linearization(field: &PseudoGradientField, p: usize) -> Result<()> {
    let cp = &field.criticals[p];
    let jac = field.jacobian(cp.location);
    let eig = eig2(jac).ok_or_else(|| Error::MorseViolation(format!("complex linearization at {:?}", cp.location)))?;
    let scale = jac.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if eig.iter().any(|e| e.0.abs() < 1e-6 * scale) {
        return Err(Error::MorseViolation(format!(
            "indeterminate unstable eigenspace at {:?}: eigenvalues {} and {}",
            cp.location, eig[0].0, eig[1].0
        )));
    }
    let unstable: Vec<[f64; 2]> = eig.iter().filter(|e| e.0 > 0.0).map(|e| e.1).collect();
    if unstable.len() != cp.index {
        return Err(Error::MorseViolation(format!(
            "linearization at {:?} has {} unstable directions, index is {}",
            cp.location,
            unstable.len(),
            cp.index
        )));
    }
    if cp.index == 1 {
        let (u, v) = (cp.frame[0], unstable[0]);
        if (u[0] * v[0] + u[1] * v[1]).abs() < 0.9 {
            return Err(Error::MorseViolation(format!("frame at {:?} is not the unstable direction", cp.location)));
        }
    }
    Ok(())
}

fn seed_point(field: &PseudoGradientField, p: usize, dir: [f64; 2], r0: f64) -> [f64; 2] {
    let cp = &field.criticals[p];
    let x = [cp.location[0] + r0 * dir[0], cp.location[1] + r0 * dir[1]];
    if cp.kind == CriticalKind::Interior {
        x
    } else {
        field.domain.project(x).point
    }
}

/// Unstable cell of the zero `p`: the point itself, the two flow-out
/// branches along the frame vector, or a fan of `resolution` flow lines
/// (adaptively refined) for index 2.
pub fn unstable_manifold(field: &PseudoGradientField, p: usize, resolution: usize) -> Result<UnstableCell> {
    if !field.zeros.contains(&p) {
        return Err(Error::InvalidInput(format!("critical point {p} is not a zero of the field")));
    }
    let cp = &field.criticals[p];
    let opts = FlowOptions::for_field(field);
    let r0 = 10.0 * opts.capture;
    match cp.index {
        0 => Ok(UnstableCell {
            critical: p,
            dim: 0,
            frame: vec![],
            orientation: 1.0,
            geometry: CellGeometry::Point(cp.location),
            branches: vec![],
        }),
        1 => {
            check_linearization(field, p)?;
            let u = cp.frame[0];
            let mut branches = Vec::new();
            for s in [-1.0, 1.0] {
                let start = seed_point(field, p, [s * u[0], s * u[1]], r0);
                let mut line = trace_flow(field, start, Direction::Forward, &opts)?;
                line.points.insert(0, cp.location);
                branches.push(line);
            }
            let mut pts: Vec<[f64; 2]> = branches[0].points.iter().rev().copied().collect();
            pts.extend(branches[1].points.iter().skip(1));
            Ok(UnstableCell { critical: p, dim: 1, frame: cp.frame.clone(), orientation: 1.0, geometry: CellGeometry::Curve(pts), branches })
        }
        2 => {
            check_linearization(field, p)?;
            let diam = field.domain.diameter();
            let stop = 1e-3 * diam;
            let ray_opts = FlowOptions { capture: stop, boundary_stop: Some(stop), ..opts.clone() };
            // Start outside the capture radius of p itself.
            let r_seed = r0.max(10.0 * stop);
            let ray = |th: f64| -> Result<FlowLine> {
                let start = seed_point(field, p, [th.cos(), th.sin()], r_seed);
                let mut l = trace_flow(field, start, Direction::Forward, &ray_opts)?;
                l.points.insert(0, start);
                Ok(l)
            };
            let n = resolution.max(8);
            let mut angles: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
            let mut rays: Vec<FlowLine> = angles.par_iter().map(|&t| ray(t)).collect::<Result<_>>()?;
            let gap = 0.02 * diam;
            for _ in 0..10 {
                let mut inserts = Vec::new();
                for k in 0..angles.len() {
                    let k2 = (k + 1) % angles.len();
                    let (a, b) = (rays[k].points.last().unwrap(), rays[k2].points.last().unwrap());
                    if (a[0] - b[0]).hypot(a[1] - b[1]) > gap {
                        let hi = if k2 == 0 { TAU } else { angles[k2] };
                        inserts.push((k, 0.5 * (angles[k] + hi)));
                    }
                }
                if inserts.is_empty() {
                    break;
                }
                let new: Vec<FlowLine> = inserts.par_iter().map(|&(_, t)| ray(t)).collect::<Result<_>>()?;
                for ((k, t), l) in inserts.into_iter().zip(new).rev() {
                    angles.insert(k + 1, t);
                    rays.insert(k + 1, l);
                }
            }
            let m = 64;
            let sampled: Vec<Vec<[f64; 2]>> = rays.iter().map(|l| resample(&l.points, m)).collect();
            let mut tris = Vec::new();
            for k in 0..sampled.len() {
                let (a, b) = (&sampled[k], &sampled[(k + 1) % sampled.len()]);
                tris.push([cp.location, a[0], b[0]]);
                for i in 0..m - 1 {
                    tris.push([a[i], a[i + 1], b[i + 1]]);
                    tris.push([a[i], b[i + 1], b[i]]);
                }
            }
            let f = &cp.frame;
            let orientation = (f[0][0] * f[1][1] - f[0][1] * f[1][0]).signum();
            Ok(UnstableCell { critical: p, dim: 2, frame: cp.frame.clone(), orientation, geometry: CellGeometry::Patch(tris), branches: rays })
        }
        i => Err(Error::MorseViolation(format!("index {i} out of range"))),
    }
}

/// Resamples a polyline at `m` points equally spaced in arclength.
fn resample(pts: &[[f64; 2]], m: usize) -> Vec<[f64; 2]> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let total = *cum.last().unwrap();
    if pts.len() < 2 || total == 0.0 {
        return vec![pts[0]; m];
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for i in 0..m {
        let s = total * i as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let w = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
    }
    out
}
