//! Closed-form model kernels, one-dimensional reference operators and the
//! localized quasimodes built from them.

mod quasimode;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sparse::Csr;
use crate::spectral::SparsePencil;

pub use quasimode::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// e^{-T|Z|²/2} on Rⁿ.
    Euclidean,
    /// e^{-T|Z'|²/2 - T Z_n} on the half-space Z_n ≥ 0.
    HalfSpace,
}

/// Kernel element of a model Witten Laplacian: a positive scalar profile
/// times the form e¹∧…∧eʲ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelKernel {
    pub kind: KernelKind,
    pub n: usize,
    pub j: usize,
    pub t: f64,
    /// Indices (1-based) of the coordinate covectors in the form part.
    pub form_part: Vec<usize>,
}

impl ModelKernel {
    pub fn profile(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.n);
        match self.kind {
            KernelKind::Euclidean => (-0.5 * self.t * z.iter().map(|x| x * x).sum::<f64>()).exp(),
            KernelKind::HalfSpace => {
                let (tan, nz) = z.split_at(self.n - 1);
                (-0.5 * self.t * tan.iter().map(|x| x * x).sum::<f64>() - self.t * nz[0]).exp()
            }
        }
    }

    /// Derivative of the profile in the last coordinate.
    pub fn normal_derivative(&self, z: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Euclidean => -self.t * z[self.n - 1] * self.profile(z),
            KernelKind::HalfSpace => -self.t * self.profile(z),
        }
    }

    /// Squared L² norm of the profile over its domain.
    pub fn norm_squared(&self) -> f64 {
        let n = self.n as f64;
        match self.kind {
            KernelKind::Euclidean => (PI / self.t).powf(n / 2.0),
            KernelKind::HalfSpace => (PI / self.t).powf((n - 1.0) / 2.0) / (2.0 * self.t),
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("T = {t} must be positive")));
    }
    Ok(())
}

pub fn euclidean_kernel(n: usize, j: usize, t: f64) -> Result<ModelKernel> {
    check_t(t)?;
    if n == 0 || j > n {
        return Err(Error::InvalidInput(format!("degree {j} out of range for dimension {n}")));
    }
    Ok(ModelKernel { kind: KernelKind::Euclidean, n, j, t, form_part: (1..=j).collect() })
}

/// Kernel of the half-space model with absolute conditions; the form part
/// is tangential, so j ranges over 0..n-1.
pub fn halfspace_kernel(n: usize, j: usize, t: f64) -> Result<ModelKernel> {
    check_t(t)?;
    if n == 0 || j >= n {
        return Err(Error::InvalidInput(format!("degree {j} has no half-space kernel in dimension {n}")));
    }
    Ok(ModelKernel { kind: KernelKind::HalfSpace, n, j, t, form_part: (1..=j).collect() })
}

/// A discretized one-dimensional operator: grid nodes and the pencil (A, M)
/// with M diagonal.
#[derive(Clone, Debug)]
pub struct LineOperator {
    pub grid: Vec<f64>,
    pub pencil: SparsePencil,
}

impl LineOperator {
    /// Lowest `count` eigenvalues by Sturm bisection on the symmetrically
    /// scaled tridiagonal matrix M^{-1/2} A M^{-1/2}.
    pub fn sturm_eigenvalues(&self, count: usize) -> Vec<f64> {
        let n = self.grid.len();
        let s: Vec<f64> = (0..n).map(|i| 1.0 / self.pencil.m.get(i, i).sqrt()).collect();
        let diag: Vec<f64> = (0..n).map(|i| self.pencil.a.get(i, i) * s[i] * s[i]).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| self.pencil.a.get(i, i + 1) * s[i] * s[i + 1]).collect();
        tridiagonal_lowest(&diag, &off, count)
    }

    /// Discrete L² distance between v and the profile g on the grid, both
    /// normalized in the mass inner product, with the sign of v aligned to g.
    pub fn profile_error(&self, v: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        let m: Vec<f64> = (0..self.grid.len()).map(|i| self.pencil.m.get(i, i)).collect();
        let gv: Vec<f64> = self.grid.iter().map(|&z| g(z)).collect();
        let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&m).map(|((x, y), w)| x * y * w).sum::<f64>();
        let (ng, nv) = (ip(&gv, &gv).sqrt(), ip(v, v).sqrt());
        let s = if ip(&gv, v) < 0.0 { -1.0 } else { 1.0 };
        let d: Vec<f64> = gv.iter().zip(v).map(|(a, b)| a / ng - s * b / nv).collect();
        ip(&d, &d).sqrt()
    }
}

/// Number of eigenvalues below x of the symmetric tridiagonal matrix.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

pub fn tridiagonal_lowest(diag: &[f64], off: &[f64], count: usize) -> Vec<f64> {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (0..count.min(n))
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Finite differences for L_T = -d²/dz² + T²z² - T on [-L, L] with
/// Dirichlet ends. Requires T·L² ≥ 25 so the Gaussian tails are negligible.
pub fn oscillator_1d(t: f64, l: f64, h: f64) -> Result<LineOperator> {
    check_t(t)?;
    if !(h > 0.0 && l > 0.0 && h < l) {
        return Err(Error::InvalidInput(format!("grid (L = {l}, h = {h}) is invalid")));
    }
    if t * l * l < 25.0 {
        return Err(Error::InvalidInput(format!("truncation contract T·L² = {} < 25", t * l * l)));
    }
    let cells = (2.0 * l / h).round() as usize;
    let h = 2.0 * l / cells as f64;
    let grid: Vec<f64> = (1..cells).map(|i| -l + i as f64 * h).collect();
    let n = grid.len();
    let mut trips = Vec::with_capacity(3 * n);
    for (i, z) in grid.iter().enumerate() {
        trips.push((i, i, 2.0 / (h * h) + t * t * z * z - t));
        if i + 1 < n {
            trips.push((i, i + 1, -1.0 / (h * h)));
            trips.push((i + 1, i, -1.0 / (h * h)));
        }
    }
    Ok(LineOperator { grid, pencil: SparsePencil { a: Csr::from_triplets(n, n, &trips), m: Csr::identity(n) } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfLineCondition {
    /// g'(0) + T g(0) = 0.
    Robin,
    /// g(0) = 0.
    Dirichlet,
}

/// R_T = -d²/dz² + T² on [0, L] with g(L) = 0 and the given condition at 0.
///
/// The form is Σ_cells h ((g_{i+1} - g_i)/h + T (g_i + g_{i+1})/2)² with
/// trapezoid mass, i.e. the squared norm of the conjugated derivative
/// e^{-Tz} d/dz e^{Tz}. For smooth g it equals ∫ (g' + Tg)², whose natural
/// boundary condition is the Robin relation; the Dirichlet variant removes
/// the node at 0.
pub fn robin_halfline(t: f64, l: f64, h: f64, cond: HalfLineCondition) -> Result<LineOperator> {
    check_t(t)?;
    if !(h > 0.0 && l > 0.0 && h < l) {
        return Err(Error::InvalidInput(format!("grid (L = {l}, h = {h}) is invalid")));
    }
    if t * l < 12.0 {
        return Err(Error::InvalidInput(format!("truncation contract T·L = {} < 12", t * l)));
    }
    let cells = (l / h).round() as usize;
    let h = l / cells as f64;
    let first = match cond {
        HalfLineCondition::Robin => 0,
        HalfLineCondition::Dirichlet => 1,
    };
    let grid: Vec<f64> = (first..cells).map(|i| i as f64 * h).collect();
    let n = grid.len();
    let idx = |node: usize| -> Option<usize> { (node >= first && node < cells).then(|| node - first) };
    let mut trips = Vec::new();
    for c in 0..cells {
        let coef = [(c, -1.0 / h + 0.5 * t), (c + 1, 1.0 / h + 0.5 * t)];
        for &(a, ca) in &coef {
            for &(b, cb) in &coef {
                if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                    trips.push((i, j, h * ca * cb));
                }
            }
        }
    }
    let mass: Vec<f64> = grid.iter().map(|z| if *z == 0.0 { 0.5 * h } else { h }).collect();
    Ok(LineOperator { grid, pencil: SparsePencil { a: Csr::from_triplets(n, n, &trips), m: Csr::diagonal(&mass) } })
}

/// Exact eigenvalues of R_T on [0, L] with the Robin condition at 0 and
/// Dirichlet at L: the kernel-like ground state and T² + k² with
/// tan(kL) = k/T for the oscillatory ones.
pub fn robin_exact_eigenvalues(t: f64, l: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let ground = {
        // g = sinh(κ(L - z)); Robin: -κ cosh(κL) + T sinh(κL) = 0.
        let phi = |k: f64| -k * (k * l).cosh() + t * (k * l).sinh();
        let (mut a, mut b) = (0.5 * t, 1.5 * t);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if phi(a) * phi(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let k = 0.5 * (a + b);
        t * t - k * k
    };
    out.push(ground);
    let mut m = 0usize;
    while out.len() < count {
        // g = k cos(kz) - T sin(kz); one root per branch (mπ, (m+1/2)π)/L, m ≥ 1.
        let lo = (m as f64) * PI / l + 1e-12;
        let hi = (m as f64 + 0.5) * PI / l - 1e-12;
        let g = |k: f64| (k * l).tan() - k / t;
        if g(lo) * g(hi) < 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if g(a) * g(mid) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let k = 0.5 * (a + b);
            if k > 1e-9 {
                out.push(t * t + k * k);
            }
        }
        m += 1;
    }
    out
}
