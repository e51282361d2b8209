use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::f64::consts::TAU;

use super::domain::{arc_length_table, SurfaceDomain};
use super::mesh::TriMesh;
use crate::error::{Error, Result};

/// Extra control over mesh generation.
#[derive(Clone, Debug, Default)]
pub struct MeshOptions {
    /// Boundary points (loop index, parameter) that must become vertices.
    pub boundary_features: Vec<(usize, f64)>,
    /// Interior points that must become vertices.
    pub interior_features: Vec<[f64; 2]>,
    /// Number of Laplacian smoothing sweeps (each followed by re-triangulation).
    pub smoothing: Option<usize>,
}

const LATTICE_FACTOR: f64 = 0.85;
const BOUNDARY_FACTOR: f64 = 0.85;
const CLEARANCE: f64 = 0.55;

pub fn build_mesh(domain: &SurfaceDomain, target_h: f64) -> Result<TriMesh> {
    build_mesh_with(domain, target_h, &MeshOptions::default())
}

/// Constrained Delaunay triangulation of a hexagonal lattice clipped to the
/// domain, with boundary vertices at uniform arc length on every loop.
pub fn build_mesh_with(domain: &SurfaceDomain, target_h: f64, opts: &MeshOptions) -> Result<TriMesh> {
    if !(target_h.is_finite() && target_h > 0.0) {
        return Err(Error::InvalidInput(format!("target_h = {target_h} must be positive")));
    }
    let fs = domain.feature_size();
    if target_h >= fs {
        return Err(Error::InvalidInput(format!("target_h = {target_h} exceeds the feature size {fs:.4}")));
    }
    let hb = BOUNDARY_FACTOR * target_h;
    let hs = LATTICE_FACTOR * target_h;

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut vertex_loop: Vec<Option<(usize, f64)>> = Vec::new();
    let mut polygons: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut constraints: Vec<(usize, usize)> = Vec::new();
    let mut layer: Vec<[f64; 2]> = Vec::new();
    for (li, lp) in domain.loops.iter().enumerate() {
        let n_tab = 4096;
        let table = arc_length_table(lp, n_tab);
        let total = table[n_tab];
        let param_at = |s: f64| -> f64 {
            let s = s.rem_euclid(total);
            let k = table.partition_point(|&x| x <= s).clamp(1, n_tab);
            let (a, b) = (table[k - 1], table[k]);
            let frac = if b > a { (s - a) / (b - a) } else { 0.0 };
            TAU * ((k - 1) as f64 + frac) / n_tab as f64
        };
        let arc_at = |t: f64| -> f64 {
            let x = t.rem_euclid(TAU) / TAU * n_tab as f64;
            let k = (x.floor() as usize).min(n_tab - 1);
            table[k] + (x - k as f64) * (table[k + 1] - table[k])
        };
        let mut feats: Vec<f64> = opts
            .boundary_features
            .iter()
            .filter(|(l, _)| *l == li)
            .map(|(_, t)| arc_at(*t))
            .collect();
        feats.sort_by(f64::total_cmp);
        feats.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * total);
        let anchors = if feats.is_empty() { vec![0.0] } else { feats.clone() };
        let start = points.len();
        let mut poly = Vec::new();
        for (k, &s0) in anchors.iter().enumerate() {
            let s1 = if k + 1 < anchors.len() { anchors[k + 1] } else { anchors[0] + total };
            let n = ((s1 - s0) / hb).ceil().max(1.0) as usize;
            for i in 0..n {
                let s = s0 + (s1 - s0) * i as f64 / n as f64;
                let t = if i == 0 && !feats.is_empty() {
                    opts.boundary_features
                        .iter()
                        .filter(|(l, _)| *l == li)
                        .map(|(_, t)| t.rem_euclid(TAU))
                        .min_by(|a, b| (arc_at(*a) - s0).abs().total_cmp(&(arc_at(*b) - s0).abs()))
                        .unwrap()
                } else {
                    param_at(s)
                };
                let p = lp.point(t);
                points.push(p);
                vertex_loop.push(Some((li, t)));
                poly.push(p);
            }
        }
        // Staggered layer one row inside the boundary.
        let n_here = poly.len();
        for i in 0..n_here {
            let (a, b) = (poly[i], poly[(i + 1) % n_here]);
            let seg = (b[0] - a[0]).hypot(b[1] - a[1]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let pr = domain.project(mid);
            let depth = seg * 3f64.sqrt() / 2.0;
            let q = [pr.point[0] - depth * pr.normal[0], pr.point[1] - depth * pr.normal[1]];
            layer.push(q);
        }
        let count = points.len() - start;
        if count < 3 {
            return Err(Error::InvalidInput("boundary loop resolved by fewer than three points".into()));
        }
        for i in 0..count {
            constraints.push((start + i, start + (i + 1) % count));
        }
        polygons.push(poly);
    }
    let n_boundary = points.len();

    let layer_depth = hb * 3f64.sqrt() / 2.0;
    for &q in &layer {
        if domain.inside(q) && domain.project(q).signed_distance > 0.5 * layer_depth
            && opts.interior_features.iter().all(|f| (f[0] - q[0]).hypot(f[1] - q[1]) >= CLEARANCE * hs)
        {
            points.push(q);
            vertex_loop.push(None);
        }
    }
    let n_fixed = points.len();
    for &p in &opts.interior_features {
        if !domain.inside(p) || domain.project(p).signed_distance < CLEARANCE * hs {
            return Err(Error::InvalidInput(format!("interior feature {p:?} is outside or too close to the boundary")));
        }
        points.push(p);
        vertex_loop.push(None);
    }
    let [lo, hi] = domain.bounding_box;
    let dy = hs * 3f64.sqrt() / 2.0;
    let rows = ((hi[1] - lo[1]) / dy).ceil() as usize + 1;
    let cols = ((hi[0] - lo[0]) / hs).ceil() as usize + 2;
    for j in 0..rows {
        let y = lo[1] + j as f64 * dy;
        let off = if j % 2 == 1 { 0.5 * hs } else { 0.0 };
        for i in 0..cols {
            let p = [lo[0] + off + i as f64 * hs, y];
            if !domain.inside(p) {
                continue;
            }
            if domain.project(p).signed_distance < layer_depth + CLEARANCE * hs {
                continue;
            }
            if opts.interior_features.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < CLEARANCE * hs) {
                continue;
            }
            points.push(p);
            vertex_loop.push(None);
        }
    }

    let movable: Vec<bool> = (0..points.len())
        .map(|i| i >= n_boundary && !(n_fixed..n_fixed + opts.interior_features.len()).contains(&i))
        .collect();
    let mut tris = triangulate(&points, &constraints, &polygons)?;
    for _ in 0..opts.smoothing.unwrap_or(4) {
        let mut sum = vec![[0.0f64; 2]; points.len()];
        let mut cnt = vec![0usize; points.len()];
        for t in &tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                for (u, v) in [(a, b), (b, a)] {
                    sum[u][0] += points[v][0];
                    sum[u][1] += points[v][1];
                    cnt[u] += 1;
                }
            }
        }
        for i in 0..points.len() {
            if movable[i] && cnt[i] > 0 {
                let q = [sum[i][0] / cnt[i] as f64, sum[i][1] / cnt[i] as f64];
                if domain.inside(q) {
                    points[i] = q;
                }
            }
        }
        tris = triangulate(&points, &constraints, &polygons)?;
    }

    // Drop vertices that ended up in no triangle.
    let mut used = vec![false; points.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut verts = Vec::new();
    let mut vloop = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            remap[i] = verts.len();
            verts.push(points[i]);
            vloop.push(vertex_loop[i]);
        }
    }
    let tris: Vec<[usize; 3]> = tris.iter().map(|t| t.map(|v| remap[v])).collect();
    let mesh = TriMesh::from_parts(verts, tris, vloop)?;

    let chi = mesh.euler_characteristic();
    if chi != domain.euler_characteristic() {
        return Err(Error::MeshQuality(format!(
            "mesh Euler characteristic {chi} differs from the domain's {}",
            domain.euler_characteristic()
        )));
    }
    if mesh.boundary_loop_count() != domain.loops.len() {
        return Err(Error::MeshQuality("boundary loop count mismatch".into()));
    }
    for v in 0..mesh.vertices.len() {
        if mesh.boundary_vertex[v] {
            let d = domain.project(mesh.vertices[v]).signed_distance.abs();
            if d > mesh.h * mesh.h || mesh.vertex_loop[v].is_none() {
                return Err(Error::MeshQuality(format!("boundary vertex {v} is off the boundary by {d:e}")));
            }
        }
    }
    Ok(mesh)
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn triangulate(
    points: &[[f64; 2]],
    constraints: &[(usize, usize)],
    polygons: &[Vec<[f64; 2]>],
) -> Result<Vec<[usize; 3]>> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles = Vec::with_capacity(points.len());
    for p in points {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::MeshQuality(format!("triangulation insert failed: {e:?}")))?;
        handles.push(h);
    }
    let mut back = vec![usize::MAX; cdt.num_vertices()];
    for (i, h) in handles.iter().enumerate() {
        if back[h.index()] != usize::MAX {
            return Err(Error::MeshQuality(format!("duplicate mesh point {:?}", points[i])));
        }
        back[h.index()] = i;
    }
    for &(a, b) in constraints {
        if cdt.can_add_constraint(handles[a], handles[b]) {
            cdt.add_constraint(handles[a], handles[b]);
        } else {
            return Err(Error::MeshQuality("boundary constraint intersects another constraint".into()));
        }
    }
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        let vs = f.vertices().map(|v| back[v.fix().index()]);
        let c = [
            (points[vs[0]][0] + points[vs[1]][0] + points[vs[2]][0]) / 3.0,
            (points[vs[0]][1] + points[vs[1]][1] + points[vs[2]][1]) / 3.0,
        ];
        if point_in_polygon(c, &polygons[0]) && polygons[1..].iter().all(|h| !point_in_polygon(c, h)) {
            tris.push(vs);
        }
    }
    Ok(tris)
}
