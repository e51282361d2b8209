use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::sparse::Csr;

/// Gradients of the barycentric coordinates of triangle t (constant on t).
pub fn whitney_gradients(mesh: &TriMesh, t: usize) -> [[f64; 2]; 3] {
    let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let two_a = 2.0 * mesh.area(t);
    std::array::from_fn(|i| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a]
    })
}

/// Whitney-form mass matrices M0 (P1), M1 (edge elements) and M2.
pub fn mass_matrices(mesh: &TriMesh) -> Result<[Csr; 3]> {
    let nt = mesh.triangles.len();
    let mut t0 = Vec::with_capacity(9 * nt);
    let mut t1 = Vec::with_capacity(9 * nt);
    let mut t2 = Vec::with_capacity(nt);
    let scale = mesh.h * mesh.h;
    for t in 0..nt {
        let area = mesh.area(t);
        if area <= 1e-12 * scale {
            return Err(Error::MeshQuality(format!("triangle {t} has area {area:e}")));
        }
        let tri = mesh.triangles[t];
        let lam = |i: usize, j: usize| area / 12.0 * if i == j { 2.0 } else { 1.0 };
        for i in 0..3 {
            for j in 0..3 {
                t0.push((tri[i], tri[j], lam(i, j)));
            }
        }
        let g = whitney_gradients(mesh, t);
        let gg = |i: usize, j: usize| g[i][0] * g[j][0] + g[i][1] * g[j][1];
        // Local edge k runs from local vertex k to k+1; the global sign
        // accounts for the lower-to-higher orientation.
        for (ka, &(ea, sa)) in mesh.tri_edges[t].iter().enumerate() {
            let (a, b) = (ka, (ka + 1) % 3);
            for (kb, &(eb, sb)) in mesh.tri_edges[t].iter().enumerate() {
                let (c, d) = (kb, (kb + 1) % 3);
                let v = lam(a, c) * gg(b, d) - lam(a, d) * gg(b, c) - lam(b, c) * gg(a, d) + lam(b, d) * gg(a, c);
                t1.push((ea, eb, sa * sb * v));
            }
        }
        t2.push((t, t, 1.0 / area));
    }
    let nv = mesh.vertices.len();
    let ne = mesh.edges.len();
    Ok([
        Csr::from_triplets(nv, nv, &t0),
        Csr::from_triplets(ne, ne, &t1),
        Csr::from_triplets(nt, nt, &t2),
    ])
}
