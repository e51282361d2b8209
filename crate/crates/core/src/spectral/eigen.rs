use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dec::WittenForm;
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, Csr, Factor};

/// A symmetric pencil (A, M) with M positive definite.
pub trait Pencil: Sync {
    fn dim(&self) -> usize;
    fn apply_a(&self, x: &[f64]) -> Vec<f64>;
    fn apply_m(&self, x: &[f64]) -> Vec<f64>;
    /// Sparse system whose leading `dim` block realizes A - sM on solves.
    fn shifted_system(&self, shift: f64) -> Csr;
    /// Gram matrix xᵢᵀ A xⱼ.
    /// Whether A is positive semidefinite by construction; Ritz values are
    /// then clamped at zero.
    fn semidefinite(&self) -> bool {
        false
    }
    fn gram_a(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let ax: Vec<Vec<f64>> = xs.iter().map(|x| self.apply_a(x)).collect();
        (0..xs.len()).map(|i| (0..xs.len()).map(|j| 0.5 * (dot(&xs[i], &ax[j]) + dot(&xs[j], &ax[i]))).collect()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SparsePencil {
    pub a: Csr,
    pub m: Csr,
}

impl Pencil for SparsePencil {
    fn dim(&self) -> usize {
        self.a.nrows
    }
    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        self.a.matvec(x)
    }
    fn apply_m(&self, x: &[f64]) -> Vec<f64> {
        self.m.matvec(x)
    }
    fn shifted_system(&self, shift: f64) -> Csr {
        self.a.add(&self.m, -shift)
    }
}

impl Pencil for WittenForm {
    fn dim(&self) -> usize {
        WittenForm::dim(self)
    }
    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
    fn apply_m(&self, x: &[f64]) -> Vec<f64> {
        self.mass.matvec(x)
    }
    fn shifted_system(&self, shift: f64) -> Csr {
        WittenForm::shifted_system(self, shift)
    }
    fn semidefinite(&self) -> bool {
        true
    }
    fn gram_a(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.gram(xs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// ‖Ax - λMx‖ / ((‖A‖ + |λ|‖M‖)‖x‖) per pair.
    pub residuals: Vec<f64>,
    pub seed: u64,
}

const DENSE_LIMIT: usize = 300;
const SHIFT: f64 = -1.0;
const KRYLOV_BLOCKS: usize = 5;
const MAX_RESTARTS: usize = 80;

/// k smallest eigenpairs of A x = λ M x for sparse symmetric A, M.
pub fn lowest_eigenpairs(a: &Csr, m: &Csr, k: usize, tol: f64, seed: u64) -> Result<Eigenpairs> {
    if a.nrows != a.ncols || m.nrows != m.ncols || a.nrows != m.nrows {
        return Err(Error::InvalidInput("pencil matrices must be square and of equal size".into()));
    }
    lowest_eigenpairs_pencil(&SparsePencil { a: a.clone(), m: m.clone() }, k, tol, seed)
}

fn sym_eigen(g: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = g.len();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (g[i][j] + g[j][i]));
    let evd = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver { msg: format!("dense eigensolver failed: {e:?}"), residuals: vec![] })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vecs: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
    }
    out
}

fn power_norm(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut est = 0.0;
    for _ in 0..30 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = apply(&x);
        est = norm2(&y);
        if est == 0.0 {
            return 0.0;
        }
        x = y;
    }
    est
}

/// M-orthonormalizes `cand` against `basis` (with cached M·basis) and
/// appends the survivors.
fn extend_basis(basis: &mut Vec<Vec<f64>>, mbasis: &mut Vec<Vec<f64>>, cand: Vec<Vec<f64>>, p: &dyn Pencil) -> usize {
    let mut added = 0;
    for mut v in cand {
        let start = dot(&v, &p.apply_m(&v)).sqrt();
        if !(start > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for (u, mu) in basis.iter().zip(mbasis.iter()) {
                let c = dot(mu, &v);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        let mv = p.apply_m(&v);
        let nrm = dot(&v, &mv).sqrt();
        if nrm > 1e-10 * start {
            basis.push(v.iter().map(|x| x / nrm).collect());
            mbasis.push(mv.iter().map(|x| x / nrm).collect());
            added += 1;
        }
    }
    added
}

struct Scales {
    a: f64,
    m: f64,
}

fn residual(p: &dyn Pencil, x: &[f64], lam: f64, sc: &Scales) -> f64 {
    let ax = p.apply_a(x);
    let mx = p.apply_m(x);
    let r: Vec<f64> = ax.iter().zip(&mx).map(|(a, m)| a - lam * m).collect();
    norm2(&r) / ((sc.a + lam.abs() * sc.m) * norm2(x)).max(1e-300)
}

/// Rayleigh-Ritz with the pencil's own Gram form on an M-orthonormal set.
fn refine(p: &dyn Pencil, xs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let g = p.gram_a(xs);
    let (vals, q) = sym_eigen(&g)?;
    let vecs = q.iter().map(|c| combine(xs, c)).collect();
    let floor = if p.semidefinite() { 0.0 } else { f64::NEG_INFINITY };
    Ok((vals.iter().map(|v| v.max(floor)).collect(), vecs))
}

/// k smallest eigenpairs of a pencil.
///
/// Small problems are solved densely. Larger ones use a restarted block
/// Krylov method on the shift-inverted operator (A - sM)^{-1} M with s < 0,
/// Rayleigh-Ritz in the M inner product, and a final Ritz step with the
/// pencil's Gram form so that tiny eigenvalues keep relative accuracy.
pub fn lowest_eigenpairs_pencil(p: &dyn Pencil, k: usize, tol: f64, seed: u64) -> Result<Eigenpairs> {
    let n = p.dim();
    if k > n {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a {n}-dimensional pencil")));
    }
    if k == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: vec![], residuals: vec![], seed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = Scales {
        a: power_norm(|x| p.apply_a(x), n, &mut rng),
        m: power_norm(|x| p.apply_m(x), n, &mut rng),
    };
    let block = (k + (k / 2).max(4)).min(n);

    let (_, mut vecs) = if n <= DENSE_LIMIT {
        dense_solve(p)?
    } else {
        let sys = p.shifted_system(SHIFT);
        let mut fac = Factor::new(&sys)?;
        let sdim = sys.nrows;
        let apply_s = |fac: &Factor, xs: &[Vec<f64>]| -> Vec<Vec<f64>> {
            let mut rhs: Vec<Vec<f64>> = xs
                .iter()
                .map(|x| {
                    let mut b = p.apply_m(x);
                    b.resize(sdim, 0.0);
                    b
                })
                .collect();
            fac.solve_columns(&mut rhs);
            rhs.into_iter().map(|mut y| {
                y.truncate(n);
                y
            }).collect()
        };
        let mut x: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let mut best = vec![f64::INFINITY; k];
        let mut result = None;
        let mut shift = SHIFT;
        for restart in 0..MAX_RESTARTS {
            let mut basis = Vec::new();
            let mut mbasis = Vec::new();
            let mut blk = x.clone();
            for j in 0..KRYLOV_BLOCKS {
                let before = basis.len();
                extend_basis(&mut basis, &mut mbasis, blk, p);
                if basis.len() >= n || basis.len() == before {
                    break;
                }
                if j + 1 < KRYLOV_BLOCKS {
                    blk = apply_s(&fac, &basis[before..]);
                } else {
                    blk = vec![];
                }
            }
            let ab: Vec<Vec<f64>> = basis.iter().map(|v| p.apply_a(v)).collect();
            let g: Vec<Vec<f64>> =
                (0..basis.len()).map(|i| (0..basis.len()).map(|j| dot(&basis[i], &ab[j])).collect()).collect();
            let (rv, rq) = sym_eigen(&g)?;
            let take = block.min(basis.len());
            x = (0..take).map(|i| combine(&basis, &rq[i])).collect();
            let res: Vec<f64> = (0..k.min(take)).map(|i| residual(p, &x[i], rv[i], &scales)).collect();
            for (b, r) in best.iter_mut().zip(&res) {
                *b = b.min(*r);
            }
            if res.len() == k && res.iter().all(|r| *r <= tol) {
                result = Some((rv[..take].to_vec(), x.clone()));
                break;
            }
            // When the wanted eigenvalues are small against |SHIFT| they
            // cluster near 1/|SHIFT| after inversion; move the shift once to
            // the scale of the first Ritz estimates.
            if restart == 0 && take > k {
                let spread = (rv[take - 1] - rv[0]).max(1e-12 * scales.a / scales.m.max(1e-300));
                let s_new = rv[0] - spread;
                if s_new > 0.1 * shift {
                    fac = Factor::new(&p.shifted_system(s_new))?;
                    shift = s_new;
                }
            }
        }
        match result {
            Some(r) => r,
            None => {
                return Err(Error::Solver { msg: format!("{k} pairs not converged to {tol:e}"), residuals: best });
            }
        }
    };
    let keep = block.min(vecs.len());
    vecs.truncate(keep);
    let (vals, vecs) = refine(p, &vecs)?;
    let mut out = Eigenpairs { values: vec![], vectors: vec![], residuals: vec![], seed };
    for i in 0..k {
        let r = residual(p, &vecs[i], vals[i], &scales);
        out.values.push(vals[i]);
        out.residuals.push(r);
    }
    out.vectors = vecs.into_iter().take(k).map(normalize_sign).collect();
    if out.residuals.iter().any(|r| !(*r <= tol.max(1e-12) * 10.0)) {
        return Err(Error::Solver { msg: format!("post-check residuals exceed {tol:e}"), residuals: out.residuals });
    }
    Ok(out)
}

/// Fixes the sign so that the entry of largest magnitude is positive.
fn normalize_sign(mut v: Vec<f64>) -> Vec<f64> {
    let i = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |b, (i, x)| if x.abs() > b.1 + 1e-12 * b.1 { (i, x.abs()) } else { b })
        .0;
    if v[i] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

fn dense_solve(p: &dyn Pencil) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = p.dim();
    let unit = |j: usize| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        e
    };
    let acols: Vec<Vec<f64>> = (0..n).map(|j| p.apply_a(&unit(j))).collect();
    let mcols: Vec<Vec<f64>> = (0..n).map(|j| p.apply_m(&unit(j))).collect();
    let (mv, mq) = sym_eigen(&mcols)?;
    if mv.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("mass matrix is not positive definite".into()));
    }
    // M^{-1/2} = Q diag(1/sqrt(μ)) Qᵀ
    let mut mis = vec![vec![0.0; n]; n];
    for (l, q) in mq.iter().enumerate() {
        let s = 1.0 / mv[l].sqrt();
        for i in 0..n {
            for j in 0..n {
                mis[i][j] += s * q[i] * q[j];
            }
        }
    }
    let mat = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
    };
    let c = mat(&mat(&mis, &acols), &mis);
    let (cv, cq) = sym_eigen(&c)?;
    let vecs = cq.iter().map(|y| (0..n).map(|i| dot(&mis[i], y)).collect()).collect();
    Ok((cv, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pencil() {
        let i = Csr::identity(5);
        let e = lowest_eigenpairs(&i, &i, 3, 1e-10, 1).unwrap();
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_path_iterative() {
        // 1D Dirichlet Laplacian, eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 800;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = Csr::from_triplets(n, n, &t);
        let m = Csr::identity(n);
        let e = lowest_eigenpairs(&a, &m, 4, 1e-10, 7).unwrap();
        for (k, v) in e.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12 * (1.0 + exact) + 1e-14, "{v} {exact}");
        }
        let e2 = lowest_eigenpairs(&a, &m, 4, 1e-10, 7).unwrap();
        assert_eq!(e, e2);
    }
}
