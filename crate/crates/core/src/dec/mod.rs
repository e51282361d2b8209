//! Discrete deformed de Rham complex on a triangle mesh: Whitney mass
//! matrices, incidence operators, the conjugated derivative d_T and the
//! quadratic forms of the Witten Laplacian under absolute or relative
//! boundary conditions.

mod whitney;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::morse::MorseFunction;
use crate::sparse::{dot, Csr, Factor};

pub use whitney::{mass_matrices, whitney_gradients};

/// Largest exponent accepted before a deformation weight overflows.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Absolute,
    Relative,
}

impl BoundaryCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryCondition::Absolute => "absolute",
            BoundaryCondition::Relative => "relative",
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(BoundaryCondition::Absolute),
            "relative" => Ok(BoundaryCondition::Relative),
            _ => Err(Error::Configuration(format!("unknown boundary condition '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cochain {
    pub degree: usize,
    pub values: Vec<f64>,
}

/// Operators of the deformed complex for one mesh, function and boundary
/// condition. Everything is stored on the full complex; `free` lists the
/// degrees of freedom that survive the boundary condition.
#[derive(Clone, Debug)]
pub struct WittenAssembly {
    pub d: [Csr; 2],
    pub mass: [Csr; 3],
    /// f evaluated at simplex barycenters, per degree.
    pub f_bary: [Vec<f64>; 3],
    /// max f over all barycenters; weights are reported relative to it.
    pub f_max: f64,
    pub bc: BoundaryCondition,
    pub free: [Vec<usize>; 3],
}

pub fn assemble(mesh: &TriMesh, f: &MorseFunction, bc: BoundaryCondition) -> Result<WittenAssembly> {
    let mass = mass_matrices(mesh)?;
    let f_bary: [Vec<f64>; 3] =
        std::array::from_fn(|k| (0..mesh.n_simplices(k)).map(|i| f.value(mesh.barycenter(k, i))).collect());
    if f_bary.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("f is not finite on the mesh".into()));
    }
    let f_max = f_bary.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let free = std::array::from_fn(|k| match bc {
        BoundaryCondition::Absolute => (0..mesh.n_simplices(k)).collect(),
        BoundaryCondition::Relative => (0..mesh.n_simplices(k)).filter(|&i| !mesh.is_boundary(k, i)).collect(),
    });
    Ok(WittenAssembly { d: [mesh.d0.clone(), mesh.d1.clone()], mass, f_bary, f_max, bc, free })
}

/// Conjugates an incidence matrix: entry (σ, τ) becomes d[σ,τ]·e^{T(f_τ - f_σ)},
/// which is W_{k+1}^{-1} d W_k with W = diag(e^{T f}).
pub fn deform_incidence(d: &Csr, f_from: &[f64], f_to: &[f64], t: f64) -> Result<Csr> {
    let mut out = d.clone();
    for r in 0..d.nrows {
        for k in d.indptr[r]..d.indptr[r + 1] {
            let x = t * (f_from[d.indices[k]] - f_to[r]);
            if !(x <= MAX_EXPONENT) {
                return Err(Error::Overflow { exponent: x });
            }
            out.data[k] *= x.exp();
        }
    }
    Ok(out)
}

impl WittenAssembly {
    pub fn dim(&self, k: usize) -> usize {
        self.free[k].len()
    }

    pub fn total_dim(&self, k: usize) -> usize {
        self.mass[k].nrows
    }

    /// Deformation weights e^{T(f - max f)} per simplex of degree k.
    pub fn weights(&self, t: f64, k: usize) -> Vec<f64> {
        self.f_bary[k].iter().map(|v| (t * (v - self.f_max)).exp()).collect()
    }

    pub fn mass_free(&self, k: usize) -> Csr {
        self.mass[k].select(&self.free[k], &self.free[k])
    }

    /// d_{T,k} = W_{k+1}^{-1} d_k W_k restricted to free dofs.
    pub fn deformed_derivative(&self, t: f64, k: usize) -> Result<Csr> {
        if k > 1 {
            return Err(Error::InvalidInput(format!("no derivative out of degree {k}")));
        }
        let dt = deform_incidence(&self.d[k], &self.f_bary[k], &self.f_bary[k + 1], t)?;
        Ok(dt.select(&self.free[k + 1], &self.free[k]))
    }

    /// Extends a free-dof vector by zeros to the full complex.
    pub fn extend(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total_dim(k)];
        for (i, &j) in self.free[k].iter().enumerate() {
            out[j] = x[i];
        }
        out
    }

    pub fn restrict(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.free[k].iter().map(|&j| x[j]).collect()
    }

    /// Quadratic form of D_T² in degree k on the free dofs.
    pub fn witten_quadratic_form(&self, t: f64, k: usize) -> Result<WittenForm> {
        if k > 2 {
            return Err(Error::InvalidInput(format!("degree {k} out of range")));
        }
        let mass = self.mass_free(k);
        let (dt_up, mass_up) = if k < 2 {
            (Some(self.deformed_derivative(t, k)?), Some(self.mass_free(k + 1)))
        } else {
            (None, None)
        };
        let upper = match (&dt_up, &mass_up) {
            (Some(d), Some(m)) => d.transpose().matmul(&m.matmul(d)),
            _ => Csr::zeros(mass.nrows, mass.ncols),
        };
        let lower = if k > 0 {
            let dt = self.deformed_derivative(t, k - 1)?;
            let m_prev = self.mass_free(k - 1);
            let coupling = mass.matmul(&dt);
            let m_prev_factor = if m_prev.nrows > 0 { Some(std::sync::Arc::new(Factor::new(&m_prev)?)) } else { None };
            Some(LowerPart { coupling, m_prev, m_prev_factor })
        } else {
            None
        };
        Ok(WittenForm { degree: k, t, upper, mass, dt_up, mass_up, lower })
    }

    /// Kernel dimensions of A_k(0) per degree, counted below tol times the
    /// first eigenvalue above the near-kernel cluster.
    pub fn hodge_betti(&self, tol: f64, seed: u64) -> Result<[usize; 3]> {
        let mut out = [0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let form = self.witten_quadratic_form(0.0, k)?;
            let want = form.dim().min(8);
            if want == 0 {
                continue;
            }
            let eig = crate::spectral::lowest_eigenpairs_pencil(&form, want, 1e-9, seed)?;
            *o = near_kernel_count(&eig.values, tol)?;
        }
        Ok(out)
    }
}

/// Size of the leading cluster separated from the rest by a gap of at
/// least 1/tol. A floor relative to the largest computed eigenvalue stands
/// in for the cluster below the first eigenvalue.
pub fn near_kernel_count(values: &[f64], tol: f64) -> Result<usize> {
    if values.is_empty() {
        return Ok(0);
    }
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-10 * top.max(1e-300);
    let mut best = (0.0f64, 0usize);
    for c in 0..values.len() {
        let below = if c == 0 { floor } else { values[c - 1].abs().max(floor) };
        let ratio = values[c] / below;
        if ratio > best.0 {
            best = (ratio, c);
        }
    }
    if best.0 * tol < 1.0 {
        return Err(Error::Resolution(format!(
            "no spectral gap of ratio 1/{tol} among {values:?}; request more eigenvalues"
        )));
    }
    Ok(best.1)
}

#[derive(Clone, Debug)]
pub struct LowerPart {
    /// M_k d_{T,k-1} on free dofs.
    pub coupling: Csr,
    pub m_prev: Csr,
    m_prev_factor: Option<std::sync::Arc<Factor>>,
}

/// The pencil (A_k(T), M_k) with
/// A_k = d_{T,k}ᵀ M_{k+1} d_{T,k} + M_k d_{T,k-1} M_{k-1}^{-1} d_{T,k-1}ᵀ M_k.
/// The second term is dense and is applied through a factorization of M_{k-1}.
#[derive(Clone, Debug)]
pub struct WittenForm {
    pub degree: usize,
    pub t: f64,
    pub upper: Csr,
    pub mass: Csr,
    pub dt_up: Option<Csr>,
    pub mass_up: Option<Csr>,
    pub lower: Option<LowerPart>,
}

impl WittenForm {
    pub fn dim(&self) -> usize {
        self.mass.nrows
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.upper.matvec(x);
        if let Some(l) = &self.lower {
            if let Some(fac) = &l.m_prev_factor {
                let mut z = l.coupling.matvec_t(x);
                fac.solve_in_place(&mut z);
                let w = l.coupling.matvec(&z);
                y.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
            }
        }
        y
    }

    /// Gram matrix of the form on the given vectors, computed as sums of
    /// squares so that exponentially small values keep their relative accuracy.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = xs.len();
        let mut g = vec![vec![0.0; n]; n];
        if let (Some(d), Some(m)) = (&self.dt_up, &self.mass_up) {
            let ys: Vec<Vec<f64>> = xs.iter().map(|x| d.matvec(x)).collect();
            let mys: Vec<Vec<f64>> = ys.iter().map(|y| m.matvec(y)).collect();
            for i in 0..n {
                for j in 0..n {
                    g[i][j] += dot(&ys[i], &mys[j]);
                }
            }
        }
        if let Some(l) = &self.lower {
            if let Some(fac) = &l.m_prev_factor {
                let bs: Vec<Vec<f64>> = xs.iter().map(|x| l.coupling.matvec_t(x)).collect();
                let zs: Vec<Vec<f64>> = bs
                    .iter()
                    .map(|b| {
                        let mut z = b.clone();
                        fac.solve_in_place(&mut z);
                        z
                    })
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        g[i][j] += 0.5 * (dot(&bs[i], &zs[j]) + dot(&bs[j], &zs[i]));
                    }
                }
            }
        }
        g
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.gram(std::slice::from_ref(&x.to_vec()))[0][0]
    }

    /// Sparse matrix of the shift-invert system for A - s M. For k > 0 the
    /// dense term is kept implicit through an augmented quasi-definite block
    /// [[U - sM_k, M_k D], [Dᵀ M_k, -M_{k-1}]].
    pub fn shifted_system(&self, shift: f64) -> Csr {
        let top = self.upper.add(&self.mass, -shift);
        match &self.lower {
            Some(l) if l.m_prev.nrows > 0 => {
                Csr::block2(&top, &l.coupling, &l.coupling.transpose(), &l.m_prev.scale(-1.0))
            }
            _ => top,
        }
    }

    /// Dense A_k, for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(self.apply(&e));
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}

impl LowerPart {
    pub fn has_factor(&self) -> bool {
        self.m_prev_factor.is_some()
    }
}
