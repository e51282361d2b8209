use crate::dec::{whitney_gradients, Cochain};
use crate::error::{Error, Result};
use crate::geometry::{barycentric, triangle_area, Locator, TriMesh};
use crate::morse::{CellGeometry, UnstableCell};

/// Integrates Whitney interpolants of cochains over unstable cells.
pub struct CellIntegrator<'a> {
    mesh: &'a TriMesh,
    locator: Locator,
    /// Boundary edges incident to each vertex.
    boundary_star: Vec<Vec<usize>>,
}

/// One-shot form of [`CellIntegrator::integrate`].
pub fn integrate_over_unstable(mesh: &TriMesh, alpha: &Cochain, cell: &UnstableCell) -> Result<f64> {
    CellIntegrator::new(mesh).integrate(alpha, cell)
}

impl<'a> CellIntegrator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let mut boundary_star = vec![Vec::new(); mesh.vertices.len()];
        for (e, &[u, v]) in mesh.edges.iter().enumerate() {
            if mesh.boundary_edge[e] {
                boundary_star[u].push(e);
                boundary_star[v].push(e);
            }
        }
        CellIntegrator { mesh, locator: Locator::new(mesh), boundary_star }
    }

    /// ∫ over the oriented cell of the Whitney form of `alpha`; for 0-cells,
    /// the interpolated value at the point.
    pub fn integrate(&self, alpha: &Cochain, cell: &UnstableCell) -> Result<f64> {
        if alpha.degree != cell.dim {
            return Err(Error::InvalidInput(format!(
                "cannot integrate a {}-cochain over a {}-cell",
                alpha.degree, cell.dim
            )));
        }
        if alpha.values.len() != self.mesh.n_simplices(alpha.degree) {
            return Err(Error::InvalidInput("cochain length does not match the mesh".into()));
        }
        match &cell.geometry {
            CellGeometry::Point(p) => Ok(self.point_value(&alpha.values, *p)),
            CellGeometry::Curve(pts) => {
                let pts: Vec<[f64; 2]> = pts.iter().map(|&p| self.snap(p)).collect();
                Ok(pts.windows(2).map(|w| self.segment(&alpha.values, w[0], w[1])).sum())
            }
            CellGeometry::Patch(tris) => Ok(cell.orientation * tris.iter().map(|t| self.triangle(&alpha.values, t)).sum::<f64>()),
        }
    }

    fn point_value(&self, v: &[f64], p: [f64; 2]) -> f64 {
        let (t, l) = self.locator.locate_or_nearest(self.mesh, p);
        let tri = self.mesh.triangles[t];
        (0..3).map(|i| l[i] * v[tri[i]]).sum()
    }

    /// Whitney 1-form of the edge values on triangle t, evaluated at p
    /// (extrapolated if p lies outside t).
    fn one_form(&self, v: &[f64], t: usize, p: [f64; 2]) -> [f64; 2] {
        let l = barycentric(self.mesh, t, p);
        let g = whitney_gradients(self.mesh, t);
        let mut w = [0.0; 2];
        for k in 0..3 {
            let (e, o) = self.mesh.tri_edges[t][k];
            let (a, b) = (k, (k + 1) % 3);
            let c = o * v[e];
            for d in 0..2 {
                w[d] += c * (l[a] * g[b][d] - l[b] * g[a][d]);
            }
        }
        w
    }

    /// Closest point of the mesh to p.
    fn snap(&self, p: [f64; 2]) -> [f64; 2] {
        if self.locator.locate(self.mesh, p).is_some() {
            return p;
        }
        let (t, _) = self.locator.locate_or_nearest(self.mesh, p);
        let tri = self.mesh.triangles[t];
        let mut best = (f64::INFINITY, p);
        for k in 0..3 {
            let q = closest_on_segment(self.mesh.vertices[tri[k]], self.mesh.vertices[tri[(k + 1) % 3]], p);
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 {
                best = (d, q);
            }
        }
        best.1
    }

    fn piece(&self, v: &[f64], t: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
        let w = self.one_form(v, t, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        w[0] * (b[0] - a[0]) + w[1] * (b[1] - a[1])
    }

    /// Integral along the mesh boundary from x on edge e0 to y on edge e1,
    /// following the shorter way around.
    fn boundary_path(&self, v: &[f64], e0: usize, x: [f64; 2], e1: usize, y: [f64; 2]) -> f64 {
        let tri_of = |e: usize| self.mesh.edge_tris[e][0];
        if e0 == e1 {
            return self.piece(v, tri_of(e0), x, y);
        }
        let mut best: Option<Vec<(usize, usize)>> = None;
        for start in self.mesh.edges[e0] {
            // Walk edge to edge through boundary vertices, starting at `start`.
            let mut path = vec![(e0, start)];
            let (mut e, mut vtx) = (e0, start);
            for _ in 0..64 {
                let Some(&next) = self.boundary_star[vtx].iter().find(|&&f| f != e) else { break };
                let [a, b] = self.mesh.edges[next];
                let other = if a == vtx { b } else { a };
                if next == e1 {
                    path.push((next, vtx));
                    if best.as_ref().is_none_or(|p| path.len() < p.len()) {
                        best = Some(path.clone());
                    }
                    break;
                }
                path.push((next, other));
                e = next;
                vtx = other;
            }
        }
        let Some(path) = best else {
            // Not on a common loop: fall back to the straight chord.
            return self.piece(v, tri_of(e0), x, y);
        };
        let mut total = 0.0;
        let mut cur = x;
        for (i, &(e, vtx)) in path.iter().enumerate() {
            let to = if i + 1 == path.len() { y } else { self.mesh.vertices[vtx] };
            total += self.piece(v, tri_of(e), cur, to);
            cur = to;
        }
        total
    }

    /// Line integral over [a, b], split exactly at mesh edges. On each piece
    /// the integrand is linear, so the midpoint rule is exact. Stretches
    /// outside the mesh are replaced by paths along boundary edges, which
    /// keeps the integral of a discrete differential exact.
    fn segment(&self, v: &[f64], a: [f64; 2], b: [f64; 2]) -> f64 {
        let dir = [b[0] - a[0], b[1] - a[1]];
        let len = dir[0].hypot(dir[1]);
        if len == 0.0 {
            return 0.0;
        }
        let at = |s: f64| [a[0] + s * dir[0], a[1] + s * dir[1]];
        // Parameter step that stays inside the triangle being entered.
        let eps = 1e-9 * self.mesh.h / len;
        let (mut t, _) = self.locator.locate_or_nearest(self.mesh, a);
        let mut s0 = 0.0;
        let mut total = 0.0;
        let limit = 4 * self.mesh.triangles.len() + 16;
        for _ in 0..limit {
            if s0 >= 1.0 {
                break;
            }
            // The piece must start in t; after crossing a vertex the
            // neighbour across the exit edge need not contain it.
            let ahead = at(s0 + eps.min(0.5 * (1.0 - s0)));
            if !self.contains(t, ahead) {
                let next = self.mesh.tri_edges[t]
                    .iter()
                    .flat_map(|&(e, _)| self.mesh.edge_tris[e].iter().copied())
                    .find(|&u| u != t && self.contains(u, ahead))
                    .or_else(|| self.locator.locate(self.mesh, ahead).map(|(u, _)| u));
                match next {
                    Some(u) => t = u,
                    None => {
                        let x = at(s0);
                        let e = self.boundary_edge_at(t, x);
                        let (s_in, t_in) = self.reentry(&at, s0);
                        let x_in = at(s_in);
                        let e_in = self.boundary_edge_at(t_in, x_in);
                        total += self.boundary_path(v, e, x, e_in, x_in);
                        t = t_in;
                        s0 = s_in;
                        continue;
                    }
                }
            }
            let la = barycentric(self.mesh, t, a);
            let lb = barycentric(self.mesh, t, b);
            let mut s1 = 1.0f64;
            for i in 0..3 {
                let d = la[i] - lb[i];
                if d > 0.0 {
                    let si = la[i] / d;
                    if si > s0 {
                        s1 = s1.min(si);
                    }
                }
            }
            total += self.piece(v, t, at(s0), at(s1));
            s0 = s1;
        }
        total
    }

    fn contains(&self, t: usize, p: [f64; 2]) -> bool {
        barycentric(self.mesh, t, p).iter().all(|&l| l >= -1e-12)
    }

    /// Boundary edge through or nearest to x, among the boundary edges of t
    /// and those at its vertices.
    fn boundary_edge_at(&self, t: usize, x: [f64; 2]) -> usize {
        let own = self.mesh.tri_edges[t].iter().map(|&(e, _)| e).filter(|&e| self.mesh.boundary_edge[e]);
        let star = self.mesh.triangles[t].iter().flat_map(|&u| self.boundary_star[u].iter().copied());
        own.chain(star)
            .min_by(|&e1, &e2| {
                let d = |e: usize| {
                    let [u, w] = self.mesh.edges[e];
                    let q = closest_on_segment(self.mesh.vertices[u], self.mesh.vertices[w], x);
                    (q[0] - x[0]).hypot(q[1] - x[1])
                };
                d(e1).total_cmp(&d(e2))
            })
            .expect("a triangle on the mesh boundary has a boundary edge or vertex")
    }

    /// First parameter after s where the segment is back inside the mesh,
    /// with the triangle there; (1, nearest triangle to the end) if never.
    fn reentry(&self, at: &dyn Fn(f64) -> [f64; 2], s: f64) -> (f64, usize) {
        let n = 64;
        let mut lo = s;
        for k in 1..=n {
            let hi = s + (1.0 - s) * k as f64 / n as f64;
            if self.locator.locate(self.mesh, at(hi)).is_some() {
                let mut hi = hi;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.locator.locate(self.mesh, at(mid)).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let (t, _) = self.locator.locate(self.mesh, at(hi)).unwrap();
                return (hi, t);
            }
            lo = hi;
        }
        (1.0, self.locator.locate_or_nearest(self.mesh, at(1.0)).0)
    }

    /// Density of the Whitney 2-form at p.
    fn two_form(&self, v: &[f64], p: [f64; 2]) -> f64 {
        let (t, _) = self.locator.locate_or_nearest(self.mesh, p);
        v[t] / self.mesh.area(t)
    }

    /// Edge-midpoint rule on one oriented triangle of a patch.
    fn triangle(&self, v: &[f64], t: &[[f64; 2]; 3]) -> f64 {
        let area = triangle_area(t[0], t[1], t[2]);
        if area == 0.0 {
            return 0.0;
        }
        let mid = |i: usize, j: usize| [0.5 * (t[i][0] + t[j][0]), 0.5 * (t[i][1] + t[j][1])];
        area * (self.two_form(v, mid(0, 1)) + self.two_form(v, mid(1, 2)) + self.two_form(v, mid(2, 0))) / 3.0
    }
}

fn closest_on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let s = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    [a[0] + s * d[0], a[1] + s * d[1]]
}
