//! Comparison map from the low-lying Witten eigenforms to the Thom-Smale
//! complex, by integration of e^{Tf}α over closures of unstable manifolds.

mod integrate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dec::{BoundaryCondition, Cochain, WittenAssembly};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceDomain, TriMesh};
use crate::model::quasimode;
use crate::morse::{smith_invariants, CriticalKind, CriticalPoint, MorseComplexData, UnstableCell};
use crate::sparse::dot;
use crate::spectral::SpectralEntry;

pub use integrate::{integrate_over_unstable, CellIntegrator};

type Matrix = Vec<Vec<f64>>;

/// M-orthonormal eigenvectors of the low cluster, per degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstantonBasis {
    #[serde(rename = "T")]
    pub t: f64,
    pub bc: BoundaryCondition,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub eigenvalues: [Vec<f64>; 3],
    /// Full-complex cochains.
    pub vectors: [Vec<Cochain>; 3],
}

/// Collects the eigenvectors below C0 from one spectral entry per degree.
/// Every entry must resolve the threshold: either it contains an eigenvalue
/// ≥ C0 or it exhausts the space.
pub fn instanton_basis(asm: &WittenAssembly, entries: [&SpectralEntry; 3], c0: f64) -> Result<InstantonBasis> {
    let t = entries[0].t;
    let mut eigenvalues: [Vec<f64>; 3] = Default::default();
    let mut vectors: [Vec<Cochain>; 3] = Default::default();
    for (j, e) in entries.iter().enumerate() {
        if e.degree != j || e.t != t || e.bc != asm.bc {
            return Err(Error::InvalidInput(format!("spectral entry {j} does not match degree, T or boundary condition")));
        }
        let resolved = e.eigenvalues.iter().any(|&l| l >= c0) || e.eigenvalues.len() >= e.dim;
        if !resolved {
            return Err(Error::Resolution(format!("degree {j}: computed spectrum does not reach C0 = {c0}")));
        }
        let m = asm.mass_free(j);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for (l, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
            if *l >= c0 {
                continue;
            }
            let mut x = asm.restrict(j, &v.values);
            for b in &basis {
                let c = dot(b, &m.matvec(&x));
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
            }
            let n = dot(&x, &m.matvec(&x)).sqrt();
            x.iter_mut().for_each(|xi| *xi /= n);
            basis.push(x);
            eigenvalues[j].push(*l);
        }
        vectors[j] = basis.iter().map(|x| Cochain { degree: j, values: asm.extend(j, x) }).collect();
    }
    Ok(InstantonBasis { t, bc: asm.bc, c0, eigenvalues, vectors })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonMatrices {
    #[serde(rename = "T")]
    pub t: f64,
    /// The e^{Tf} weight is applied as e^{T(f - f_shift)}; true entries of P
    /// are e^{T f_shift} times the stored ones.
    pub f_shift: f64,
    /// Rows: generators; columns: basis vectors.
    pub p: [Matrix; 3],
    /// Rows: basis vectors; columns: generators.
    pub e: [Matrix; 3],
    pub f_diag: [Vec<f64>; 3],
    pub n_diag: [Vec<f64>; 3],
}

/// F and N of a generator: f(p) and j for interior points,
/// f(q) + ln(2π)/(2T) and j - 1/2 for C₋ points.
pub fn predicted_exponents(p: &CriticalPoint, t: f64) -> (f64, f64) {
    match p.kind {
        CriticalKind::Interior => (p.f_value, p.index as f64),
        _ => (p.f_value + (2.0 * PI).ln() / (2.0 * t), p.index as f64 - 0.5),
    }
}

/// P∞,T: entry (p, α) = ∫ over the closure of W^u(p) of e^{Tf}α.
pub fn p_infinity_t(
    asm: &WittenAssembly,
    integrator: &CellIntegrator,
    basis: &InstantonBasis,
    cells: &[Vec<UnstableCell>; 3],
) -> Result<[Matrix; 3]> {
    let mut out: [Matrix; 3] = Default::default();
    for j in 0..3 {
        let w = asm.weights(basis.t, j);
        let weighted: Vec<Cochain> = basis.vectors[j]
            .iter()
            .map(|c| Cochain { degree: j, values: c.values.iter().zip(&w).map(|(a, b)| a * b).collect() })
            .collect();
        out[j] = cells[j]
            .par_iter()
            .map(|cell| weighted.iter().map(|c| integrator.integrate(c, cell)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
    }
    Ok(out)
}

/// Components of the quasimodes of the generators in the instanton basis.
pub fn quasimode_projection(
    asm: &WittenAssembly,
    mesh: &TriMesh,
    data: &MorseComplexData,
    basis: &InstantonBasis,
    radius: f64,
) -> Result<[Matrix; 3]> {
    let f = &data.field.f;
    let domain: &SurfaceDomain = &data.field.domain;
    let mut out: [Matrix; 3] = Default::default();
    for j in 0..3 {
        let m = asm.mass_free(j);
        let qs: Vec<Vec<f64>> = data.complex.generators[j]
            .par_iter()
            .map(|g| quasimode(asm, mesh, f, domain, g, basis.t, radius).map(|q| asm.restrict(j, &q.cochain.values)))
            .collect::<Result<_>>()?;
        out[j] = basis.vectors[j]
            .iter()
            .map(|c| {
                let mc = m.matvec(&asm.restrict(j, &c.values));
                qs.iter().map(|q| dot(&mc, q)).collect()
            })
            .collect();
    }
    Ok(out)
}

/// Assembles P, E and the predicted diagonal data. Absolute complex only.
pub fn comparison_matrices(
    asm: &WittenAssembly,
    mesh: &TriMesh,
    data: &MorseComplexData,
    basis: &InstantonBasis,
    quasimode_radius: f64,
) -> Result<ComparisonMatrices> {
    if asm.bc != BoundaryCondition::Absolute || data.complex.mode != BoundaryCondition::Absolute {
        return Err(Error::InvalidInput("the comparison map is built for the absolute complex".into()));
    }
    for j in 0..3 {
        let (g, b) = (data.complex.generators[j].len(), basis.vectors[j].len());
        if g != b {
            return Err(Error::Resolution(format!(
                "degree {j}: {b} eigenvalues below C0 for {g} generators; adjust C0 or refine"
            )));
        }
    }
    let integrator = CellIntegrator::new(mesh);
    let p = p_infinity_t(asm, &integrator, basis, &data.cells)?;
    let e = quasimode_projection(asm, mesh, data, basis, quasimode_radius)?;
    let mut f_diag: [Vec<f64>; 3] = Default::default();
    let mut n_diag: [Vec<f64>; 3] = Default::default();
    for j in 0..3 {
        for g in &data.complex.generators[j] {
            let (fv, nv) = predicted_exponents(g, basis.t);
            f_diag[j].push(fv);
            n_diag[j].push(nv);
        }
    }
    Ok(ComparisonMatrices { t: basis.t, f_shift: asm.f_max, p, e, f_diag, n_diag })
}

fn frobenius(m: &Matrix) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn matmul(a: &Matrix, b: &Matrix, inner: usize, cols: usize) -> Matrix {
    a.iter().map(|r| (0..cols).map(|c| (0..inner).map(|k| r[k] * b[k][c]).sum()).collect()).collect()
}

/// Images P_{j+1}(d_T α) for the basis vectors α of degree j, as columns.
fn p_of_derivative(
    asm: &WittenAssembly,
    integrator: &CellIntegrator,
    basis: &InstantonBasis,
    cells: &[Vec<UnstableCell>; 3],
    j: usize,
) -> Result<Matrix> {
    let w = asm.weights(basis.t, j);
    // e^{Tf} d_T α = d(e^{Tf} α), so the derivative is applied to the weighted cochain.
    let images: Vec<Cochain> = basis.vectors[j]
        .iter()
        .map(|c| {
            let wc: Vec<f64> = c.values.iter().zip(&w).map(|(a, b)| a * b).collect();
            Cochain { degree: j + 1, values: asm.d[j].matvec(&wc) }
        })
        .collect();
    cells[j + 1]
        .par_iter()
        .map(|cell| images.iter().map(|c| integrator.integrate(c, cell)).collect::<Result<Vec<f64>>>())
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutationReport {
    /// Per degree j = 0, 1: ‖P d_T - ∂P‖ / (‖P‖‖d_T‖ + ‖|∂|‖‖P‖), where |∂|
    /// counts connecting flow lines without sign. Cancelling pairs of lines
    /// still set the scale, so exactly closed low forms do not give 0/0.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// P_{j+1} d_T P_j^{-1}, to be compared with the integer boundary map.
    pub induced_boundary: Vec<Matrix>,
}

/// Chain-map defect of P against the Thom-Smale boundary.
pub fn chain_commutation_residual(
    asm: &WittenAssembly,
    mesh: &TriMesh,
    data: &MorseComplexData,
    basis: &InstantonBasis,
    cm: &ComparisonMatrices,
) -> Result<CommutationReport> {
    let integrator = CellIntegrator::new(mesh);
    let mut residuals = Vec::new();
    let mut induced_boundary = Vec::new();
    for j in 0..2 {
        let (nj, nj1) = (basis.vectors[j].len(), basis.vectors[j + 1].len());
        let bd: Matrix = data.complex.boundary[j].iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        if nj == 0 || nj1 == 0 {
            residuals.push(0.0);
            induced_boundary.push(bd);
            continue;
        }
        let pd = p_of_derivative(asm, &integrator, basis, &data.cells, j)?;
        let bp = matmul(&bd, &cm.p[j], nj, nj);
        let diff: Matrix = pd.iter().zip(&bp).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        // Matrix of d_T between the orthonormal bases.
        let m1 = asm.mass_free(j + 1);
        let dt = asm.deformed_derivative(basis.t, j)?;
        let dmat: Matrix = basis.vectors[j + 1]
            .iter()
            .map(|b| {
                let mb = m1.matvec(&asm.restrict(j + 1, &b.values));
                basis.vectors[j].iter().map(|a| dot(&mb, &dt.matvec(&asm.restrict(j, &a.values)))).collect()
            })
            .collect();
        let lines: Matrix = data.complex.flow_lines[j].iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let den = frobenius(&cm.p[j + 1]) * frobenius(&dmat) + frobenius(&lines).max(frobenius(&bd)) * frobenius(&cm.p[j]);
        residuals.push(if den > 0.0 { frobenius(&diff) / den } else { 0.0 });
        let inv = invert(&cm.p[j]).ok_or_else(|| Error::ComplexInconsistency(format!("P is singular in degree {j}")))?;
        induced_boundary.push(matmul(&pd, &inv, nj, nj));
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(CommutationReport { residuals, max_residual, induced_boundary })
}

fn invert(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut m: Matrix = a.iter().enumerate().map(|(i, r)| {
        let mut row = r.clone();
        row.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
        row
    }).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[piv][c] == 0.0 || !m[piv][c].is_finite() {
            return None;
        }
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pr = m[c].clone();
                    m[r].iter_mut().zip(&pr).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let m = faer::Mat::<f64>::from_fn(n, a[0].len(), |i, j| a[i][j]);
    let mut s = m
        .singular_values()
        .map_err(|e| Error::Solver { msg: format!("singular value decomposition failed: {e:?}"), residuals: vec![] })?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeComparison {
    pub degree: usize,
    /// P·E with row p divided by e^{T F_p}(π/T)^{N_p/2 - n/4}.
    pub normalized: Matrix,
    /// log of the predicted diagonal, per generator.
    pub log_predicted: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub off_diagonal_mass: f64,
    /// |normalized_pp - 1| per generator.
    pub diagonal_errors: Vec<f64>,
    pub isomorphic: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsomorphismReport {
    #[serde(rename = "T")]
    pub t: f64,
    pub degrees: Vec<DegreeComparison>,
    pub isomorphism: bool,
}

/// Surface dimension used in the (π/T)^{N/2 - n/4} prediction.
pub const SURFACE_DIMENSION: f64 = 2.0;

/// Normalizes P·E by the predicted diagonal and declares an isomorphism
/// when every degree's smallest singular value exceeds 1/2.
pub fn verify_isomorphism(cm: &ComparisonMatrices) -> Result<IsomorphismReport> {
    let t = cm.t;
    let mut degrees = Vec::new();
    for j in 0..3 {
        let n = cm.f_diag[j].len();
        let inner = cm.e[j].len();
        if cm.p[j].len() != n || cm.p[j].iter().any(|r| r.len() != inner) || inner != n {
            return Err(Error::InvalidInput(format!("degree {j}: P and E are not square and matched")));
        }
        let pe = matmul(&cm.p[j], &cm.e[j], inner, n);
        let log_predicted: Vec<f64> = (0..n)
            .map(|p| t * cm.f_diag[j][p] + (cm.n_diag[j][p] / 2.0 - SURFACE_DIMENSION / 4.0) * (PI / t).ln())
            .collect();
        let normalized: Matrix = pe
            .iter()
            .enumerate()
            .map(|(p, r)| {
                let s = (t * cm.f_shift - log_predicted[p]).exp();
                r.iter().map(|v| v * s).collect()
            })
            .collect();
        let singular_values = singular_values(&normalized)?;
        let off: f64 = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| normalized[a][b] * normalized[a][b])
            .sum::<f64>()
            .sqrt();
        let diagonal_errors = (0..n).map(|p| (normalized[p][p] - 1.0).abs()).collect();
        let isomorphic = singular_values.last().is_none_or(|&s| s > 0.5);
        degrees.push(DegreeComparison {
            degree: j,
            normalized,
            log_predicted,
            singular_values,
            off_diagonal_mass: off,
            diagonal_errors,
            isomorphic,
        });
    }
    let isomorphism = degrees.iter().all(|d| d.isomorphic);
    Ok(IsomorphismReport { t, degrees, isomorphism })
}

/// Betti numbers of the complex whose boundary maps are the rounded
/// induced matrices.
pub fn induced_homology(report: &CommutationReport, dims: [usize; 3]) -> [i64; 3] {
    let rank = |m: &Matrix| -> i64 {
        let r: Vec<Vec<i64>> = m.iter().map(|row| row.iter().map(|v| v.round() as i64).collect()).collect();
        smith_invariants(&r).len() as i64
    };
    let r0 = report.induced_boundary.first().map(rank).unwrap_or(0);
    let r1 = report.induced_boundary.get(1).map(rank).unwrap_or(0);
    [dims[0] as i64 - r0, dims[1] as i64 - r0 - r1, dims[2] as i64 - r1]
}

/// Comparison report JSON.
pub fn comparison_json(cm: &ComparisonMatrices, iso: &IsomorphismReport, comm: &CommutationReport) -> serde_json::Value {
    serde_json::json!({
        "T": cm.t,
        "f_shift": cm.f_shift,
        "isomorphism": iso.isomorphism,
        "commutation_residual": comm.max_residual,
        "degrees": (0..3).map(|j| serde_json::json!({
            "degree": j,
            "P": cm.p[j],
            "E": cm.e[j],
            "F": cm.f_diag[j],
            "N": cm.n_diag[j],
            "normalized": iso.degrees[j].normalized,
            "log_predicted_diagonal": iso.degrees[j].log_predicted,
            "singular_values": iso.degrees[j].singular_values,
            "off_diagonal_mass": iso.degrees[j].off_diagonal_mass,
            "diagonal_errors": iso.degrees[j].diagonal_errors,
            "commutation_residual": comm.residuals.get(j),
            "induced_boundary": comm.induced_boundary.get(j),
        })).collect::<Vec<_>>(),
    })
}

/// Everything the chain-map check produces at one T.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub matrices: ComparisonMatrices,
    pub isomorphism: IsomorphismReport,
    pub commutation: CommutationReport,
    pub induced_betti: [i64; 3],
}

/// Builds the instanton basis from one spectral entry per degree and runs
/// the comparison, the isomorphism test and the commutation check.
pub fn compare(
    asm: &WittenAssembly,
    mesh: &TriMesh,
    data: &MorseComplexData,
    entries: [&SpectralEntry; 3],
    c0: f64,
    quasimode_radius: f64,
) -> Result<Comparison> {
    let basis = instanton_basis(asm, entries, c0)?;
    let matrices = comparison_matrices(asm, mesh, data, &basis, quasimode_radius)?;
    let isomorphism = verify_isomorphism(&matrices)?;
    let commutation = chain_commutation_residual(asm, mesh, data, &basis, &matrices)?;
    let induced_betti = induced_homology(&commutation, data.complex.ranks());
    Ok(Comparison { matrices, isomorphism, commutation, induced_betti })
}
