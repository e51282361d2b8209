use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigen::lowest_eigenpairs_pencil;
use crate::dec::{assemble, BoundaryCondition, Cochain, WittenAssembly};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::morse::MorseFunction;

/// Largest admissible h·√T: the mesh must resolve e^{-T|x|²/2}.
pub const RESOLUTION_CONTRACT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub degree: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub bc: BoundaryCondition,
    /// Number of free degrees of freedom; counts are final once k reaches it.
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors extended by zeros to the full complex.
    pub eigenvectors: Vec<Cochain>,
    pub residuals: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub entries: Vec<SpectralEntry>,
    pub mesh_id: String,
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl SpectralReport {
    pub fn entry(&self, degree: usize, t: f64) -> Option<&SpectralEntry> {
        self.entries.iter().find(|e| e.degree == degree && e.t == t)
    }
}

/// Lowest k eigenpairs of the Witten Laplacian in one degree.
pub fn solve_entry(asm: &WittenAssembly, t: f64, degree: usize, k: usize, tol: f64, seed: u64) -> Result<SpectralEntry> {
    let form = asm.witten_quadratic_form(t, degree)?;
    let k = k.min(form.dim());
    let ep = lowest_eigenpairs_pencil(&form, k, tol, seed)?;
    Ok(SpectralEntry {
        degree,
        t,
        bc: asm.bc,
        dim: form.dim(),
        eigenvalues: ep.values,
        eigenvectors: ep.vectors.iter().map(|v| Cochain { degree, values: asm.extend(degree, v) }).collect(),
        residuals: ep.residuals,
        seed,
    })
}

/// Solves every (T, degree) pair concurrently and assembles the entries in
/// (T, degree) order.
pub fn spectral_report(
    asm: &WittenAssembly,
    mesh_id: &str,
    t_list: &[f64],
    k: usize,
    tol: f64,
    seed: u64,
    c0: f64,
) -> Result<SpectralReport> {
    let jobs: Vec<(f64, usize)> = t_list.iter().flat_map(|&t| (0..3).map(move |j| (t, j))).collect();
    let entries = jobs
        .par_iter()
        .map(|&(t, j)| solve_entry(asm, t, j, k, tol, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralReport { entries, mesh_id: mesh_id.to_string(), c0 })
}

/// Number of eigenvalues below c0, provided the computed spectrum reaches c0.
pub fn count_below(entry: &SpectralEntry, c0: f64) -> Result<usize> {
    let exhausted = entry.eigenvalues.len() >= entry.dim;
    let resolved = entry.eigenvalues.iter().any(|v| *v >= c0);
    if !exhausted && !resolved {
        return Err(Error::Resolution(format!(
            "all {} computed eigenvalues in degree {} at T = {} lie below C0 = {c0}; request more",
            entry.eigenvalues.len(),
            entry.degree,
            entry.t
        )));
    }
    Ok(entry.eigenvalues.iter().filter(|v| **v < c0).count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub degree: usize,
    pub bc: BoundaryCondition,
    pub count: usize,
    pub lambda_small: Option<f64>,
    pub lambda_big: Option<f64>,
}

/// Fitted behaviour of one degree across the top half of the scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeFit {
    pub degree: usize,
    /// Least-squares slope of ln λ_small against T.
    pub small_slope: Option<f64>,
    /// λ_small vanishes to working precision at every fitted T, so the
    /// decay is exact rather than exponential.
    pub small_vanishes: bool,
    /// min over the fitted T of λ_big / T².
    pub big_floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub bc: BoundaryCondition,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub rows: Vec<GapRow>,
    pub fits: Vec<DegreeFit>,
    /// Count mismatches against the expected Morse counts.
    pub findings: Vec<String>,
    pub report: SpectralReport,
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub mesh_id: String,
    pub expected: Option<[usize; 3]>,
    pub override_contract: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { k: 6, tol: 1e-9, seed: 0, mesh_id: String::new(), expected: None, override_contract: false }
    }
}

/// Eigenvalues below this fraction of λ_big are treated as exact zeros.
const VANISHING: f64 = 1e-13;

pub fn check_resolution(h: f64, t_max: f64) -> Result<()> {
    if h * t_max.max(0.0).sqrt() > RESOLUTION_CONTRACT {
        return Err(Error::Configuration(format!(
            "h·√T = {:.4} exceeds {RESOLUTION_CONTRACT}; refine the mesh or lower T",
            h * t_max.sqrt()
        )));
    }
    Ok(())
}

pub fn gap_scan(
    mesh: &TriMesh,
    f: &MorseFunction,
    t_list: &[f64],
    c0: f64,
    bc: BoundaryCondition,
    opts: &ScanOptions,
) -> Result<GapScan> {
    if t_list.is_empty() || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] < 0.0 {
        return Err(Error::Configuration(format!("T list {t_list:?} must be nonnegative and strictly ascending")));
    }
    if !(c0 > 0.0) {
        return Err(Error::Configuration(format!("C0 = {c0} must be positive")));
    }
    if !opts.override_contract {
        check_resolution(mesh.h, *t_list.last().unwrap())?;
    }
    let asm = assemble(mesh, f, bc)?;
    let mut report = spectral_report(&asm, &opts.mesh_id, t_list, opts.k, opts.tol, opts.seed, c0)?;
    // Entries whose computed spectrum stays below C0 are re-solved with more pairs.
    for e in report.entries.iter_mut() {
        let mut k = opts.k;
        while count_below(e, c0).is_err() && k < e.dim {
            k *= 2;
            *e = solve_entry(&asm, e.t, e.degree, k, opts.tol, opts.seed)?;
        }
    }
    let mut rows = Vec::new();
    let mut findings = Vec::new();
    for e in &report.entries {
        let count = count_below(e, c0)?;
        let lambda_small = e.eigenvalues.iter().copied().filter(|v| *v < c0).last();
        let lambda_big = e.eigenvalues.iter().copied().find(|v| *v >= c0);
        if let Some(exp) = opts.expected {
            if exp[e.degree] != count {
                findings.push(format!(
                    "degree {} at T = {}: {count} eigenvalues below C0, expected {}",
                    e.degree, e.t, exp[e.degree]
                ));
            }
        }
        rows.push(GapRow { t: e.t, degree: e.degree, bc, count, lambda_small, lambda_big });
    }
    let top: Vec<f64> = t_list[t_list.len() / 2..].to_vec();
    let fits = (0..3)
        .map(|j| {
            let sel: Vec<&GapRow> = rows.iter().filter(|r| r.degree == j && top.contains(&r.t)).collect();
            let small: Vec<(f64, f64, f64)> = sel
                .iter()
                .filter_map(|r| r.lambda_small.map(|s| (r.t, s, r.lambda_big.unwrap_or(c0))))
                .collect();
            let small_vanishes = !small.is_empty() && small.iter().all(|(_, s, b)| *s <= VANISHING * b);
            let pts: Vec<(f64, f64)> =
                small.iter().filter(|(_, s, b)| *s > VANISHING * b).map(|(t, s, _)| (*t, s.ln())).collect();
            let small_slope = if small_vanishes || pts.len() < 2 { None } else { Some(ls_slope(&pts)) };
            let big_floor = sel
                .iter()
                .filter(|r| r.t > 0.0)
                .filter_map(|r| r.lambda_big.map(|b| b / (r.t * r.t)))
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
            DegreeFit { degree: j, small_slope, small_vanishes, big_floor }
        })
        .collect();
    Ok(GapScan { bc, c0, rows, fits, findings, report })
}

/// Least-squares slope of y against x.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

impl GapScan {
    pub fn counts_at(&self, t: f64) -> [usize; 3] {
        let mut out = [0; 3];
        for r in self.rows.iter().filter(|r| r.t == t) {
            out[r.degree] = r.count;
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_gap_csv(&self.rows, w)
    }
}

/// Gap table as CSV with header T,degree,bc,count,lambda_small,lambda_big.
pub fn write_gap_csv<W: std::io::Write>(rows: &[GapRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(["T", "degree", "bc", "count", "lambda_small", "lambda_big"]).map_err(io)?;
    let opt = |v: Option<f64>| v.map(fmt12).unwrap_or_default();
    for r in rows {
        wr.write_record([
            fmt12(r.t),
            r.degree.to_string(),
            r.bc.as_str().to_string(),
            r.count.to_string(),
            opt(r.lambda_small),
            opt(r.lambda_big),
        ])
        .map_err(io)?;
    }
    Ok(wr.flush()?)
}

/// Formats a float with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{:.11e}", v);
    s.parse::<f64>().map(|x| format!("{x}")).unwrap_or(s)
}
