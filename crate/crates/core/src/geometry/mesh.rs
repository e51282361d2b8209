use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Oriented simplicial 2-complex with boundary bookkeeping.
///
/// Edges are oriented from the lower to the higher vertex index, triangles
/// counterclockwise. `vertex_loop` records the boundary loop and parameter
/// of vertices placed on the continuum boundary.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per triangle, the edges (v0v1, v1v2, v2v0) with relative orientation.
    pub tri_edges: Vec<[(usize, f64); 3]>,
    pub edge_tris: Vec<Vec<usize>>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    pub vertex_loop: Vec<Option<(usize, f64)>>,
    pub d0: Csr,
    pub d1: Csr,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_vertices: usize,
    pub boundary_edges: usize,
    pub boundary_loops: usize,
    pub h: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub euler_characteristic: i64,
}

pub fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl TriMesh {
    /// Builds the complex from vertices and triangles. Triangles are
    /// reoriented counterclockwise; degenerate ones are rejected.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        vertex_loop: Vec<Option<(usize, f64)>>,
    ) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidInput("empty mesh".into()));
        }
        assert_eq!(vertex_loop.len(), vertices.len());
        let mut tris = triangles;
        let mut hmax: f64 = 0.0;
        for t in tris.iter_mut() {
            let area = triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area < 0.0 {
                t.swap(1, 2);
            }
            for k in 0..3 {
                let (a, b) = (vertices[t[k]], vertices[t[(k + 1) % 3]]);
                hmax = hmax.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        for (i, t) in tris.iter().enumerate() {
            let area = triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area <= 1e-12 * hmax * hmax {
                return Err(Error::MeshQuality(format!("triangle {i} is degenerate (area {area:e})")));
            }
        }
        let mut keys: Vec<[usize; 2]> = tris
            .iter()
            .flat_map(|t| (0..3).map(move |k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                [a.min(b), a.max(b)]
            }))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let index: HashMap<[usize; 2], usize> = keys.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut edge_tris = vec![Vec::new(); keys.len()];
        let mut tri_edges = Vec::with_capacity(tris.len());
        for (ti, t) in tris.iter().enumerate() {
            let mut te = [(0usize, 0.0f64); 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = index[&[a.min(b), a.max(b)]];
                te[k] = (e, if a < b { 1.0 } else { -1.0 });
                edge_tris[e].push(ti);
            }
            tri_edges.push(te);
        }
        let mut boundary_edge = vec![false; keys.len()];
        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, ts) in edge_tris.iter().enumerate() {
            match ts.len() {
                1 => {
                    boundary_edge[e] = true;
                    boundary_vertex[keys[e][0]] = true;
                    boundary_vertex[keys[e][1]] = true;
                }
                2 => {}
                n => return Err(Error::MeshQuality(format!("edge {e} has {n} cofaces"))),
            }
        }
        let mut d0t = Vec::with_capacity(2 * keys.len());
        for (e, [a, b]) in keys.iter().enumerate() {
            d0t.push((e, *a, -1.0));
            d0t.push((e, *b, 1.0));
        }
        let mut d1t = Vec::with_capacity(3 * tris.len());
        for (ti, te) in tri_edges.iter().enumerate() {
            for &(e, s) in te {
                d1t.push((ti, e, s));
            }
        }
        let d0 = Csr::from_triplets(keys.len(), vertices.len(), &d0t);
        let d1 = Csr::from_triplets(tris.len(), keys.len(), &d1t);
        let mesh = TriMesh {
            vertices,
            edges: keys,
            triangles: tris,
            tri_edges,
            edge_tris,
            boundary_vertex,
            boundary_edge,
            vertex_loop,
            d0,
            d1,
            h: hmax,
        };
        if mesh.d1.matmul(&mesh.d0).max_abs() != 0.0 {
            return Err(Error::MeshQuality("incidence composition d1·d0 is not zero".into()));
        }
        Ok(mesh)
    }

    pub fn n_simplices(&self, k: usize) -> usize {
        match k {
            0 => self.vertices.len(),
            1 => self.edges.len(),
            2 => self.triangles.len(),
            _ => 0,
        }
    }

    pub fn is_boundary(&self, k: usize, i: usize) -> bool {
        match k {
            0 => self.boundary_vertex[i],
            1 => self.boundary_edge[i],
            _ => false,
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        triangle_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Barycenter of the k-simplex i.
    pub fn barycenter(&self, k: usize, i: usize) -> [f64; 2] {
        let avg = |vs: &[usize]| {
            let n = vs.len() as f64;
            let s = vs.iter().fold([0.0, 0.0], |s, &v| [s[0] + self.vertices[v][0], s[1] + self.vertices[v][1]]);
            [s[0] / n, s[1] / n]
        };
        match k {
            0 => self.vertices[i],
            1 => avg(&self.edges[i]),
            _ => avg(&self.triangles[i]),
        }
    }

    fn components(&self, n: usize, links: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, b) in links {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..n).map(|x| find(&mut parent, x)).collect()
    }

    /// Number of connected components of the boundary edge graph.
    pub fn boundary_loop_count(&self) -> usize {
        let roots = self.components(
            self.vertices.len(),
            self.edges.iter().zip(&self.boundary_edge).filter(|(_, b)| **b).map(|(e, _)| (e[0], e[1])),
        );
        let mut r: Vec<usize> = (0..self.vertices.len()).filter(|&v| self.boundary_vertex[v]).map(|v| roots[v]).collect();
        r.sort_unstable();
        r.dedup();
        r.len()
    }

    /// Simplicial Betti numbers: absolute (M) and relative (M, ∂M).
    ///
    /// β0 counts components; a component carries a 2-cycle only if it has no
    /// boundary edge; β1 follows from the Euler characteristic. The relative
    /// numbers use H2(M,∂M) = components with boundary, H0(M,∂M) = closed
    /// components and χ(M,∂M) = χ(M) - χ(∂M) = χ(M).
    pub fn betti(&self) -> ([i64; 3], [i64; 3]) {
        let roots = self.components(self.vertices.len(), self.edges.iter().map(|e| (e[0], e[1])));
        let mut comps: Vec<usize> = roots.clone();
        comps.sort_unstable();
        comps.dedup();
        let mut with_boundary: Vec<usize> =
            (0..self.vertices.len()).filter(|&v| self.boundary_vertex[v]).map(|v| roots[v]).collect();
        with_boundary.sort_unstable();
        with_boundary.dedup();
        let b0 = comps.len() as i64;
        let closed = b0 - with_boundary.len() as i64;
        let chi = self.euler_characteristic();
        let abs = [b0, b0 + closed - chi, closed];
        let rel = [closed, closed + b0 - chi, b0];
        (abs, rel)
    }

    pub fn angles_deg(&self) -> (f64, f64) {
        let mut lo = 180.0f64;
        let mut hi = 0.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let a = self.vertices[t[(k + 1) % 3]];
                let b = self.vertices[t[(k + 2) % 3]];
                let u = [a[0] - p[0], a[1] - p[1]];
                let v = [b[0] - p[0], b[1] - p[1]];
                let ang = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]).abs().to_degrees();
                lo = lo.min(ang);
                hi = hi.max(ang);
            }
        }
        (lo, hi)
    }

    /// Writes the mesh in ASCII OFF format (z = 0).
    pub fn write_off<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} {}", self.vertices.len(), self.triangles.len(), self.edges.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.12e} {:.12e} 0", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

pub fn mesh_report(mesh: &TriMesh) -> Result<MeshReport> {
    if mesh.vertices.is_empty() || mesh.triangles.is_empty() {
        return Err(Error::InvalidInput("empty mesh".into()));
    }
    let (lo, hi) = mesh.angles_deg();
    Ok(MeshReport {
        vertices: mesh.vertices.len(),
        edges: mesh.edges.len(),
        triangles: mesh.triangles.len(),
        boundary_vertices: mesh.boundary_vertex.iter().filter(|b| **b).count(),
        boundary_edges: mesh.boundary_edge.iter().filter(|b| **b).count(),
        boundary_loops: mesh.boundary_loop_count(),
        h: mesh.h,
        min_angle_deg: lo,
        max_angle_deg: hi,
        euler_characteristic: mesh.euler_characteristic(),
    })
}

/// Uniform bucket grid for point location in a triangle mesh.
#[derive(Clone, Debug)]
pub struct Locator {
    origin: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let cell = mesh.h.max(1e-12);
        let dims = [
            ((hi[0] - lo[0]) / cell).floor() as usize + 1,
            ((hi[1] - lo[1]) / cell).floor() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        let mut loc = Locator { origin: lo, cell, dims, buckets: Vec::new() };
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let mut a = [usize::MAX; 2];
            let mut b = [0usize; 2];
            for &v in t {
                let c = loc.cell_of(mesh.vertices[v]);
                for k in 0..2 {
                    a[k] = a[k].min(c[k]);
                    b[k] = b[k].max(c[k]);
                }
            }
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    buckets[j * dims[0] + i].push(ti);
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    fn cell_of(&self, p: [f64; 2]) -> [usize; 2] {
        let f = |k: usize| {
            let x = ((p[k] - self.origin[k]) / self.cell).floor();
            (x.max(0.0) as usize).min(self.dims[k] - 1)
        };
        [f(0), f(1)]
    }

    /// Triangle containing p (up to a small tolerance) with barycentric coordinates.
    pub fn locate(&self, mesh: &TriMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let c = self.cell_of(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[c[1] * self.dims[0] + c[0]] {
            let l = barycentric(mesh, t, p);
            let m = l[0].min(l[1]).min(l[2]);
            if best.as_ref().is_none_or(|b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        best.filter(|b| b.2 >= -1e-10).map(|b| (b.0, b.1))
    }

    /// Like `locate`, but falls back to the triangle in the surrounding
    /// buckets whose barycentric coordinates are least negative.
    pub fn locate_or_nearest(&self, mesh: &TriMesh, p: [f64; 2]) -> (usize, [f64; 3]) {
        if let Some(r) = self.locate(mesh, p) {
            return r;
        }
        let c = self.cell_of(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for ring in 0..4usize {
            for i in c[0].saturating_sub(ring)..=(c[0] + ring).min(self.dims[0] - 1) {
                for j in c[1].saturating_sub(ring)..=(c[1] + ring).min(self.dims[1] - 1) {
                    for &t in &self.buckets[j * self.dims[0] + i] {
                        let l = barycentric(mesh, t, p);
                        let m = l[0].min(l[1]).min(l[2]);
                        if best.as_ref().is_none_or(|b| m > b.2) {
                            best = Some((t, l, m));
                        }
                    }
                }
            }
            if best.is_some() {
                break;
            }
        }
        let b = best.expect("mesh has triangles near the query point");
        (b.0, b.1)
    }
}

pub fn barycentric(mesh: &TriMesh, t: usize, p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let area = triangle_area(a, b, c);
    [
        triangle_area(p, b, c) / area,
        triangle_area(a, p, c) / area,
        triangle_area(a, b, p) / area,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriMesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        TriMesh::from_parts(v, vec![[0, 1, 2], [0, 3, 2]], vec![None; 4]).unwrap()
    }

    #[test]
    fn square_complex() {
        let m = square();
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.edges.len(), 5);
        assert_eq!(m.boundary_edge.iter().filter(|b| **b).count(), 4);
        assert_eq!(m.betti(), ([1, 0, 0], [0, 0, 1]));
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_loop_count(), 1);
    }

    #[test]
    fn locate_points() {
        let m = square();
        let loc = Locator::new(&m);
        let (t, l) = loc.locate(&m, [0.75, 0.25]).unwrap();
        assert_eq!(t, 0);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(loc.locate(&m, [1.5, 0.5]).is_none());
        let (_, l) = loc.locate_or_nearest(&m, [1.01, 0.5]);
        assert!(l.iter().any(|x| *x < 0.0));
    }

    #[test]
    fn empty_mesh_rejected() {
        assert!(TriMesh::from_parts(vec![], vec![], vec![]).is_err());
    }
}
