use serde::{Deserialize, Serialize};

use super::complex::ThomSmaleComplex;
use crate::dec::BoundaryCondition;

/// Nonzero invariant factors of an integer matrix (Smith normal form).
pub fn smith_invariants(m: &[Vec<i64>]) -> Vec<i64> {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: smallest nonzero magnitude in the remaining block
        let mut piv = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && piv.is_none_or(|(pi, pj): (usize, usize)| a[i][j].abs() < a[pi][pj].abs()) {
                    piv = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = piv else { break };
        a.swap(t, pi);
        for r in a.iter_mut() {
            r.swap(t, pj);
        }
        loop {
            let p = a[t][t];
            let mut dirty = false;
            for i in t + 1..rows {
                let q = a[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        a[i][j] -= q * a[t][j];
                    }
                }
                if a[i][t] != 0 {
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                let q = a[t][j] / p;
                if q != 0 {
                    for i in t..rows {
                        a[i][j] -= q * a[i][t];
                    }
                }
                if a[t][j] != 0 {
                    dirty = true;
                }
            }
            if !dirty {
                // divisibility of the remaining block
                let bad = (t + 1..rows).flat_map(|i| (t + 1..cols).map(move |j| (i, j))).find(|&(i, j)| a[i][j] % p != 0);
                match bad {
                    Some((i, _)) => {
                        for j in t..cols {
                            a[t][j] += a[i][j];
                        }
                        continue;
                    }
                    None => break,
                }
            }
            // move the smallest nonzero entry of row/column t to the pivot
            let mut best = (a[t][t].abs(), t, t);
            for i in t + 1..rows {
                if a[i][t] != 0 && a[i][t].abs() < best.0 {
                    best = (a[i][t].abs(), i, t);
                }
            }
            for j in t + 1..cols {
                if a[t][j] != 0 && a[t][j].abs() < best.0 {
                    best = (a[t][j].abs(), t, j);
                }
            }
            a.swap(t, best.1);
            for r in a.iter_mut() {
                r.swap(t, best.2);
            }
        }
        out.push(a[t][t].abs() as i64);
        t += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyRanks {
    pub betti: [i64; 3],
    /// Torsion coefficients (invariant factors > 1) per degree.
    pub torsion: [Vec<i64>; 3],
}

/// Cohomology of (C, ∂): β_j = dim C^j - rank ∂_j - rank ∂_{j-1}.
pub fn homology_ranks(c: &ThomSmaleComplex) -> HomologyRanks {
    let inv: Vec<Vec<i64>> = c.boundary.iter().map(|m| smith_invariants(m)).collect();
    let rank = |j: usize| inv[j].len() as i64;
    let n = c.ranks();
    let betti = [
        n[0] as i64 - rank(0),
        n[1] as i64 - rank(1) - rank(0),
        n[2] as i64 - rank(1),
    ];
    let tors = |j: usize| inv[j].iter().copied().filter(|&d| d > 1).collect::<Vec<_>>();
    HomologyRanks { betti, torsion: [vec![], tors(0), tors(1)] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub k: usize,
    /// Σ_{j≤k} (-1)^{k-j} β_j.
    pub betti_sum: i64,
    /// Σ_{j≤k} (-1)^{k-j} m_j.
    pub count_sum: i64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseInequalities {
    pub mode: BoundaryCondition,
    pub counts: [usize; 3],
    pub betti: [i64; 3],
    pub rows: Vec<InequalityRow>,
    /// Equality of the alternating sums at k = 2.
    pub equality_at_top: bool,
}

impl MorseInequalities {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds) && self.equality_at_top
    }
}

/// Strong Morse inequalities for the counts m_j (c_j + p_j in absolute
/// mode, c_j + q_{j-1} in relative mode) against β_j(M) or β_j(M, ∂M).
pub fn morse_inequalities(counts: &super::MorseCounts, betti: [i64; 3], mode: BoundaryCondition) -> MorseInequalities {
    let m = match mode {
        BoundaryCondition::Absolute => counts.absolute(),
        BoundaryCondition::Relative => counts.relative(),
    };
    let rows: Vec<InequalityRow> = (0..3)
        .map(|k| {
            let sgn = |j: usize| if (k - j) % 2 == 0 { 1 } else { -1 };
            let betti_sum = (0..=k).map(|j| sgn(j) * betti[j]).sum();
            let count_sum = (0..=k).map(|j| sgn(j) * m[j] as i64).sum();
            InequalityRow { k, betti_sum, count_sum, holds: betti_sum <= count_sum }
        })
        .collect();
    let equality_at_top = rows[2].betti_sum == rows[2].count_sum;
    MorseInequalities { mode, counts: m, betti, rows, equality_at_top }
}
