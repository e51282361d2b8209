use serde::{Deserialize, Serialize};

use super::PseudoGradientField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowLimit {
    /// Reached the zero of X with this index into the field's critical list.
    Critical(usize),
    /// The backward flow left the domain through the boundary.
    BoundaryExit,
    MaxLength,
    /// Stopped within `boundary_stop` of the boundary.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowLine {
    pub points: Vec<[f64; 2]>,
    pub limit: FlowLimit,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Largest arclength per accepted step.
    pub step: f64,
    /// Local error tolerance per step.
    pub tol: f64,
    /// Distance at which a zero of X counts as reached.
    pub capture: f64,
    pub max_length: f64,
    pub max_steps: usize,
    /// Stop once the trajectory comes this close to the boundary.
    pub boundary_stop: Option<f64>,
}

impl FlowOptions {
    pub fn for_field(field: &PseudoGradientField) -> Self {
        let diam = field.domain.diameter();
        FlowOptions {
            step: 0.01 * diam,
            tol: 1e-9 * diam,
            capture: 1e-4 * diam,
            max_length: 20.0 * diam,
            max_steps: 200_000,
            boundary_stop: None,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates X (or -X) from `start` with an adaptive Dormand-Prince 5(4)
/// scheme until a zero of X is reached, the backward flow exits through the
/// boundary, or the arclength budget runs out. Forward trajectories that
/// overshoot the boundary are projected back onto it.
pub fn trace_flow(field: &PseudoGradientField, start: [f64; 2], dir: Direction, opts: &FlowOptions) -> Result<FlowLine> {
    let sgn = if dir == Direction::Forward { 1.0 } else { -1.0 };
    let rhs = |p: [f64; 2]| {
        let v = field.value(p);
        [sgn * v[0], sgn * v[1]]
    };
    let near_zero = |p: [f64; 2]| {
        field.zeros.iter().copied().find(|&i| {
            let c = field.criticals[i].location;
            (c[0] - p[0]).hypot(c[1] - p[1]) <= opts.capture
        })
    };
    if let Some(z) = near_zero(start) {
        return Ok(FlowLine { points: vec![], limit: FlowLimit::Critical(z), length: 0.0 });
    }
    let mut x = start;
    let mut pts = vec![x];
    let mut length = 0.0;
    let v0 = rhs(x);
    let mut h = opts.step / v0[0].hypot(v0[1]).max(1e-12);
    let mut k1 = v0;
    for _ in 0..opts.max_steps {
        let speed = k1[0].hypot(k1[1]);
        if speed < 1e-14 {
            return Err(Error::Integration(format!("flow stagnates at {x:?} away from known zeros")));
        }
        h = h.min(opts.step / speed);
        let mut k = [[0.0; 2]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut y = x;
            for (j, kj) in k.iter().enumerate().take(s) {
                y[0] += h * A[s][j] * kj[0];
                y[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(y);
        }
        let mut y5 = x;
        let mut err = [0.0; 2];
        for s in 0..7 {
            for c in 0..2 {
                y5[c] += h * B5[s] * k[s][c];
                err[c] += h * (B5[s] - B4[s]) * k[s][c];
            }
        }
        let e = err[0].hypot(err[1]) / opts.tol;
        if e > 1.0 {
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            if h < 1e-14 {
                return Err(Error::Integration(format!("step size underflow at {x:?}")));
            }
            continue;
        }
        let mut next = y5;
        let mut fsal = k[6];
        if let Some(pr) = field.boundary_near(next) {
            if opts.boundary_stop.is_some_and(|b| pr.signed_distance < b) {
                let end = if pr.signed_distance < 0.0 { pr.point } else { next };
                length += (end[0] - x[0]).hypot(end[1] - x[1]);
                pts.push(end);
                return Ok(FlowLine { points: pts, limit: FlowLimit::Truncated, length });
            }
            if pr.signed_distance < 0.0 {
                let v = rhs(pr.point);
                if dir == Direction::Backward && v[0] * pr.normal[0] + v[1] * pr.normal[1] > 1e-12 {
                    pts.push(pr.point);
                    length += (pr.point[0] - x[0]).hypot(pr.point[1] - x[1]);
                    return Ok(FlowLine { points: pts, limit: FlowLimit::BoundaryExit, length });
                }
                next = pr.point;
                fsal = v;
            }
        }
        length += (next[0] - x[0]).hypot(next[1] - x[1]);
        x = next;
        k1 = fsal;
        pts.push(x);
        if let Some(z) = near_zero(x) {
            pts.push(field.criticals[z].location);
            return Ok(FlowLine { points: pts, limit: FlowLimit::Critical(z), length });
        }
        if length > opts.max_length {
            return Ok(FlowLine { points: pts, limit: FlowLimit::MaxLength, length });
        }
        h *= (0.9 * e.max(1e-10).powf(-0.2)).min(5.0);
    }
    Ok(FlowLine { points: pts, limit: FlowLimit::MaxLength, length })
}
