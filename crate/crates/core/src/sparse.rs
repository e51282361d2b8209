//! Compressed sparse row matrices with the handful of operations the
//! discretization needs.

use faer::sparse::{SparseColMat, Triplet};

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], data: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Csr { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![1.0; n] }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.data.copy_from_slice(d);
        m
    }

    /// Builds a matrix from (row, col, value) entries; duplicates are summed
    /// and explicit zeros produced by cancellation are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; nrows + 1];
        for &(r, c, _) in trips {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds {nrows}x{ncols}");
            count[r + 1] += 1;
        }
        for i in 0..nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; trips.len()];
        let mut vals = vec![0.0; trips.len()];
        for &(r, c, v) in trips {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(trips.len());
        let mut data = Vec::with_capacity(trips.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((count[r]..count[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Csr { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.data[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    /// y = Aᵀ x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Csr::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, s: f64) -> Csr {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// diag(left) · A · diag(right)
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Csr {
        let mut m = self.clone();
        for r in 0..m.nrows {
            for k in m.indptr[r]..m.indptr[r + 1] {
                m.data[k] *= left[r] * right[m.indices[k]];
            }
        }
        m
    }

    pub fn add(&self, other: &Csr, alpha: f64) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)));
        Csr::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr.push(indices.len());
        }
        Csr { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            map[c] = j;
        }
        let mut t = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    t.push((i, map[c], v));
                }
            }
        }
        Csr::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Stacks [[a, b], [c, d]] into one matrix.
    pub fn block2(a: &Csr, b: &Csr, c: &Csr, d: &Csr) -> Csr {
        assert_eq!(a.nrows, b.nrows);
        assert_eq!(c.nrows, d.nrows);
        assert_eq!(a.ncols, c.ncols);
        assert_eq!(b.ncols, d.ncols);
        let (n1, m1) = (a.nrows, a.ncols);
        let mut t = a.triplets();
        t.extend(b.triplets().into_iter().map(|(r, cc, v)| (r, cc + m1, v)));
        t.extend(c.triplets().into_iter().map(|(r, cc, v)| (r + n1, cc, v)));
        t.extend(d.triplets().into_iter().map(|(r, cc, v)| (r + n1, cc + m1, v)));
        Csr::from_triplets(n1 + c.nrows, m1 + b.ncols, &t)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute row sum, an upper bound for the spectral norm of a
    /// symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        self.add(&t, -1.0).max_abs()
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).expect("valid triplets")
    }

    /// Coordinate text export: one "row col value" line per stored entry.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Sparse direct factorization (LU with fill-reducing ordering) of a square
/// matrix, used for shift-invert solves and mass-matrix inverses.
pub struct Factor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Factor({})", self.n)
    }
}

impl Factor {
    pub fn new(a: &Csr) -> crate::Result<Self> {
        assert_eq!(a.nrows, a.ncols);
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| crate::Error::Factorization(format!("{e:?}")))?;
        Ok(Factor { n: a.nrows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        let mut m = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        for (i, x) in b.iter_mut().enumerate() {
            *x = m[(i, 0)];
        }
    }

    /// Solves for every column of `b` (each of length `dim`).
    pub fn solve_columns(&self, b: &mut [Vec<f64>]) {
        use faer::linalg::solvers::Solve;
        if b.is_empty() {
            return;
        }
        let mut m = faer::Mat::<f64>::from_fn(self.n, b.len(), |i, j| b[j][i]);
        self.lu.solve_in_place(m.as_mut());
        for (j, col) in b.iter_mut().enumerate() {
            for (i, x) in col.iter_mut().enumerate() {
                *x = m[(i, j)];
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
