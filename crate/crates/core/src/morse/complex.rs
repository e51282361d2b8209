use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::cells::{unstable_manifold, UnstableCell};
use super::critical::{find_critical_points, morse_counts, CriticalKind, CriticalPoint, MorseCounts};
use super::field::{adapted_field, PseudoGradientField};
use super::flow::{trace_flow, Direction, FlowLimit, FlowOptions};
use super::MorseFunction;
use crate::dec::BoundaryCondition;
use crate::error::{Error, Result};
use crate::geometry::SurfaceDomain;

#[derive(Clone, Debug)]
pub struct ConnectionOptions {
    /// Seeds on the unstable circle of an index-2 point.
    pub seeds: usize,
    /// Angular width at which bisection stops.
    pub bisection_tol: f64,
    /// Flow lines closer than this (in seed angle) are merged.
    pub merge_tol: f64,
    /// Rays in the fan of an index-2 cell.
    pub patch_resolution: usize,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions { seeds: 360, bisection_tol: 1e-10, merge_tol: 1e-7, patch_resolution: 180 }
    }
}

/// Signed count n(q, p) of flow lines from q (index j+1) to p (index j),
/// together with diagnostics from the enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub count: i64,
    /// Signs n_γ of the individual flow lines.
    pub lines: Vec<i64>,
    pub diagnostics: Vec<String>,
}

fn check_pair(field: &PseudoGradientField, q: usize, p: usize) -> Result<()> {
    let (cq, cp) = (&field.criticals[q], &field.criticals[p]);
    if !field.zeros.contains(&q) || !field.zeros.contains(&p) {
        return Err(Error::InvalidInput("connection endpoints must be generators".into()));
    }
    if cq.index != cp.index + 1 {
        return Err(Error::InvalidInput(format!(
            "connections run from index j+1 to j, got {} and {}",
            cq.index, cp.index
        )));
    }
    Ok(())
}

/// n(q, p) for q of index 1 from the branches of its unstable cell.
fn count_from_curve(cell: &UnstableCell, p: usize) -> Connection {
    let (neg, pos) = cell.branch_limits().expect("1-cell has two branches");
    let mut lines = Vec::new();
    if neg == FlowLimit::Critical(p) {
        lines.push(-1);
    }
    if pos == FlowLimit::Critical(p) {
        lines.push(1);
    }
    Connection { count: lines.iter().sum(), lines, diagnostics: vec![] }
}

/// Side of the stable manifold of p on which the flow line from q leaving
/// in direction θ passes: ±1 along the frame of p, 0 if it ends at p, None
/// if it never comes within the adaptation radius of p.
fn side(field: &PseudoGradientField, q: usize, p: usize, th: f64, opts: &FlowOptions) -> Result<(Option<i8>, Option<[f64; 2]>)> {
    let cq = field.criticals[q].location;
    let cp = &field.criticals[p];
    let r0 = 10.0 * opts.capture;
    let start = [cq[0] + r0 * th.cos(), cq[1] + r0 * th.sin()];
    let line = trace_flow(field, start, Direction::Forward, opts)?;
    let radius = field.a;
    let dist = |x: &[f64; 2]| (x[0] - cp.location[0]).hypot(x[1] - cp.location[1]);
    let Some(entry) = line.points.iter().position(|x| dist(x) < radius) else {
        return Ok((None, None));
    };
    let arrive = line.points[entry];
    if line.limit == FlowLimit::Critical(p) {
        return Ok((Some(0), Some(arrive)));
    }
    let Some(exit) = line.points[entry..].iter().position(|x| dist(x) >= radius) else {
        return Ok((None, Some(arrive)));
    };
    let x = line.points[entry + exit];
    let u = cp.frame[0];
    let s = (x[0] - cp.location[0]) * u[0] + (x[1] - cp.location[1]) * u[1];
    Ok((Some(if s > 0.0 { 1 } else { -1 }), Some(arrive)))
}

/// n_γ for a flow line from an index-2 point q arriving at p from `arrive`:
/// compares the boundary orientation induced by the cell of q with the
/// frame of p.
fn line_sign(field: &PseudoGradientField, q: usize, p: usize, arrive: [f64; 2]) -> i64 {
    let fq = &field.criticals[q].frame;
    let oq = (fq[0][0] * fq[1][1] - fq[0][1] * fq[1][0]).signum();
    let cp = &field.criticals[p];
    let a = [cp.location[0] - arrive[0], cp.location[1] - arrive[1]];
    let t = [-a[1] * oq, a[0] * oq];
    let u = cp.frame[0];
    if t[0] * u[0] + t[1] * u[1] > 0.0 {
        1
    } else {
        -1
    }
}

/// n(q, p) by shooting from the unstable circle of q and bisecting sign
/// changes of the side of the stable manifold of p.
fn count_by_shooting(field: &PseudoGradientField, q: usize, p: usize, opts: &ConnectionOptions) -> Result<Connection> {
    let fopts = FlowOptions::for_field(field);
    let n = opts.seeds.max(8);
    let angles: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    let sides: Vec<(Option<i8>, Option<[f64; 2]>)> =
        angles.par_iter().map(|&th| side(field, q, p, th, &fopts)).collect::<Result<_>>()?;
    let mut hits: Vec<(f64, [f64; 2])> = Vec::new();
    let mut diagnostics = Vec::new();
    for k in 0..n {
        if let (Some(0), Some(arr)) = sides[k] {
            hits.push((angles[k], arr));
        }
        let k2 = (k + 1) % n;
        let (Some(s1), Some(s2)) = (sides[k].0, sides[k2].0) else { continue };
        if s1 == 0 || s2 == 0 || s1 == s2 {
            continue;
        }
        let (mut lo, mut hi) = (angles[k], if k2 == 0 { TAU } else { angles[k2] });
        let mut arrive = sides[k].1.unwrap();
        let mut found = false;
        while hi - lo > opts.bisection_tol {
            let mid = 0.5 * (lo + hi);
            match side(field, q, p, mid, &fopts)? {
                (Some(0), Some(arr)) => {
                    arrive = arr;
                    lo = mid;
                    hi = mid;
                    found = true;
                    break;
                }
                (Some(s), Some(arr)) => {
                    arrive = arr;
                    if s == s1 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                _ => {
                    return Err(Error::Resolution(format!(
                        "bisection between angles {lo} and {hi} lost the stable manifold of {:?}",
                        field.criticals[p].location
                    )))
                }
            }
        }
        if !found && hi - lo > opts.bisection_tol {
            return Err(Error::Resolution("unresolved bisection".into()));
        }
        hits.push((0.5 * (lo + hi), arrive));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lines = Vec::new();
    let mut last: Option<f64> = None;
    for (th, arr) in hits {
        if last.is_some_and(|l| th - l < opts.merge_tol) {
            diagnostics.push(format!("merged flow lines at seed angles within {} of {th}", opts.merge_tol));
            continue;
        }
        last = Some(th);
        lines.push(line_sign(field, q, p, arr));
    }
    Ok(Connection { count: lines.iter().sum(), lines, diagnostics })
}

/// Signed count n(q, p) for a generator q of index j+1 and p of index j
/// (indices into the field's critical list).
pub fn connection_count(field: &PseudoGradientField, q: usize, p: usize, opts: &ConnectionOptions) -> Result<Connection> {
    check_pair(field, q, p)?;
    let (cq, cp) = (&field.criticals[q], &field.criticals[p]);
    if cq.kind == CriticalKind::BoundaryMinus && cp.kind == CriticalKind::Interior {
        return Ok(Connection { count: 0, lines: vec![], diagnostics: vec![] });
    }
    if cq.index == 1 {
        let cell = unstable_manifold(field, q, opts.patch_resolution)?;
        Ok(count_from_curve(&cell, p))
    } else {
        count_by_shooting(field, q, p, opts)
    }
}

/// Thom-Smale complex with coboundary ∂: C^j → C^{j+1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThomSmaleComplex {
    pub mode: BoundaryCondition,
    /// Generators per degree. In relative mode these are the generators of
    /// -f, with degree 2 - index.
    pub generators: [Vec<CriticalPoint>; 3],
    /// boundary[j] has one row per generator of degree j+1 and one column
    /// per generator of degree j; entry n(q, p).
    pub boundary: [Vec<Vec<i64>>; 2],
    /// Number of connecting flow lines regardless of sign, same layout.
    pub flow_lines: [Vec<Vec<i64>>; 2],
    pub diagnostics: Vec<String>,
}

impl ThomSmaleComplex {
    pub fn ranks(&self) -> [usize; 3] {
        std::array::from_fn(|j| self.generators[j].len())
    }

    /// Entries of ∂_{j+1} ∂_j; zero for a consistent complex.
    pub fn boundary_squared(&self) -> Vec<Vec<i64>> {
        let (a, b) = (&self.boundary[1], &self.boundary[0]);
        let n0 = self.generators[0].len();
        a.iter().map(|row| (0..n0).map(|c| row.iter().zip(b).map(|(x, r)| x * r[c]).sum()).collect()).collect()
    }
}

/// Complex together with the data it was computed from.
#[derive(Clone, Debug)]
pub struct MorseComplexData {
    pub complex: ThomSmaleComplex,
    /// Critical points of f itself (both modes).
    pub criticals: Vec<CriticalPoint>,
    pub counts: MorseCounts,
    /// Field of f (absolute) or of -f (relative).
    pub field: PseudoGradientField,
    /// Unstable cells per degree, aligned with the generators (absolute
    /// mode only).
    pub cells: [Vec<UnstableCell>; 3],
}

/// Builds the absolute complex of the field: generators are its zeros,
/// 1→0 counts come from the branches of the 1-cells and 2→1 counts from
/// shooting. Fails if ∂∘∂ ≠ 0.
pub fn build_thom_smale_complex(field: &PseudoGradientField, opts: &ConnectionOptions) -> Result<(ThomSmaleComplex, [Vec<UnstableCell>; 3])> {
    let by_degree: [Vec<usize>; 3] =
        std::array::from_fn(|j| field.zeros.iter().copied().filter(|&i| field.criticals[i].index == j).collect());
    let cells: [Vec<UnstableCell>; 3] = {
        let mut out: [Vec<UnstableCell>; 3] = Default::default();
        for j in 0..3 {
            out[j] = by_degree[j]
                .par_iter()
                .map(|&i| unstable_manifold(field, i, opts.patch_resolution))
                .collect::<Result<_>>()?;
        }
        out
    };
    let mut diagnostics = Vec::new();
    let mut boundary: [Vec<Vec<i64>>; 2] = Default::default();
    let mut flow_lines: [Vec<Vec<i64>>; 2] = Default::default();
    for j in 0..2 {
        let pairs: Vec<(usize, usize)> = (0..by_degree[j + 1].len())
            .flat_map(|r| (0..by_degree[j].len()).map(move |c| (r, c)))
            .collect();
        let conns: Vec<Connection> = pairs
            .par_iter()
            .map(|&(r, c)| {
                let (q, p) = (by_degree[j + 1][r], by_degree[j][c]);
                let (cq, cp) = (&field.criticals[q], &field.criticals[p]);
                if cq.kind == CriticalKind::BoundaryMinus && cp.kind == CriticalKind::Interior {
                    Ok(Connection { count: 0, lines: vec![], diagnostics: vec![] })
                } else if j == 0 {
                    Ok(count_from_curve(&cells[1][r], p))
                } else {
                    count_by_shooting(field, q, p, opts)
                }
            })
            .collect::<Result<_>>()?;
        let mut m = vec![vec![0i64; by_degree[j].len()]; by_degree[j + 1].len()];
        let mut lines = m.clone();
        for ((r, c), conn) in pairs.into_iter().zip(conns) {
            m[r][c] = conn.count;
            lines[r][c] = conn.lines.len() as i64;
            diagnostics.extend(conn.diagnostics);
        }
        boundary[j] = m;
        flow_lines[j] = lines;
    }
    let complex = ThomSmaleComplex {
        mode: BoundaryCondition::Absolute,
        generators: std::array::from_fn(|j| by_degree[j].iter().map(|&i| field.criticals[i].clone()).collect()),
        boundary,
        flow_lines,
        diagnostics,
    };
    if complex.boundary_squared().iter().flatten().any(|&v| v != 0) {
        return Err(Error::ComplexInconsistency(format!(
            "∂∘∂ = {:?}; a flow line was missed or mis-signed",
            complex.boundary_squared()
        )));
    }
    Ok((complex, cells))
}

/// Settings for building a scenario complex from an analytic function.
#[derive(Clone, Debug)]
pub struct ComplexSettings {
    pub adaptation_radius: f64,
    pub grid_density: usize,
    pub tol: f64,
    pub connections: ConnectionOptions,
}

/// Critical points, field and complex of f for either boundary condition.
/// The relative complex is the absolute complex of -f with degrees
/// reflected j ↦ 2 - j and transposed coboundaries.
pub fn morse_complex(f: &MorseFunction, domain: &SurfaceDomain, bc: BoundaryCondition, s: &ComplexSettings) -> Result<MorseComplexData> {
    let scan = find_critical_points(f, domain, s.grid_density, s.tol)?;
    let counts = morse_counts(&scan.points);
    let g = match bc {
        BoundaryCondition::Absolute => f.clone(),
        BoundaryCondition::Relative => f.negated(),
    };
    let gscan = match bc {
        BoundaryCondition::Absolute => scan.clone(),
        BoundaryCondition::Relative => find_critical_points(&g, domain, s.grid_density, s.tol)?,
    };
    let field = adapted_field(&g, domain, s.adaptation_radius, &gscan.points)?;
    let (mut complex, cells) = build_thom_smale_complex(&field, &s.connections)?;
    complex.diagnostics.extend(scan.diagnostics.iter().cloned());
    let cells = match bc {
        BoundaryCondition::Absolute => cells,
        BoundaryCondition::Relative => {
            let [g0, g1, g2] = complex.generators.clone();
            let [b0, b1] = complex.boundary.clone();
            complex.generators = [g2, g1, g0];
            complex.boundary = [transpose(&b1, complex.generators[1].len()), transpose(&b0, complex.generators[2].len())];
            let [l0, l1] = complex.flow_lines.clone();
            complex.flow_lines = [transpose(&l1, complex.generators[1].len()), transpose(&l0, complex.generators[2].len())];
            complex.mode = BoundaryCondition::Relative;
            Default::default()
        }
    };
    Ok(MorseComplexData { complex, criticals: scan.points, counts, field, cells })
}

/// Transpose; `ncols_if_empty` is the column count when m has no rows.
fn transpose(m: &[Vec<i64>], ncols_if_empty: usize) -> Vec<Vec<i64>> {
    let cols = m.first().map_or(ncols_if_empty, |r| r.len());
    (0..cols).map(|c| m.iter().map(|r| r[c]).collect()).collect()
}

/// JSON export of the complex.
pub fn complex_json(c: &ThomSmaleComplex) -> Result<String> {
    serde_json::to_string_pretty(c).map_err(|e| Error::Io(std::io::Error::other(e)))
}
