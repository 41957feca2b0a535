//! Compressed-row matrices, constraint elimination and a banded direct solver.
//!
//! The direct solver reorders the reduced system with reverse Cuthill-McKee,
//! factors the resulting band with partial pivoting and finishes with a few
//! steps of iterative refinement against the unfactored matrix.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.add(j, i, v);
            }
        }
        t.build()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Coordinate-format accumulator. Duplicates are summed in insertion order,
/// so assembly is deterministic.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }
}

/// A square system with optional Dirichlet values and DOF identifications.
///
/// Identified DOFs share one unknown; their equations are summed (the test
/// function of the merged unknown is the sum of the members' test functions).
/// Fixed DOFs are eliminated and their rows dropped.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    fixed: Vec<Option<f64>>,
    parent: Vec<usize>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        let n = matrix.n_rows;
        assert_eq!(matrix.n_cols, n, "system matrix must be square");
        assert_eq!(rhs.len(), n, "rhs length mismatch");
        Self { matrix, rhs, fixed: vec![None; n], parent: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    fn root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Representative DOF of the merged unknown containing `dof`.
    pub fn representative(&self, dof: usize) -> usize {
        self.root(dof)
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[self.root(dof)].is_some()
    }

    /// Prescribe a value. Fixing a DOF twice with different values is a conflict.
    pub fn fix(&mut self, dof: usize, value: f64) -> Result<()> {
        let r = self.root(dof);
        match self.fixed[r] {
            Some(v) if (v - value).abs() > 1e-14 * (1.0 + v.abs()) => {
                Err(Error::ConstraintConflict { dof })
            }
            _ => {
                self.fixed[r] = Some(value);
                Ok(())
            }
        }
    }

    /// Merge two DOFs into one unknown.
    pub fn identify(&mut self, a: usize, b: usize) -> Result<()> {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return Ok(());
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        let value = match (self.fixed[lo], self.fixed[hi]) {
            (Some(x), Some(y)) if (x - y).abs() > 1e-14 * (1.0 + x.abs()) => {
                return Err(Error::ConstraintConflict { dof: b })
            }
            (x, y) => x.or(y),
        };
        self.parent[hi] = lo;
        self.fixed[lo] = value;
        Ok(())
    }

    /// Number of free unknowns after elimination.
    pub fn reduced_len(&self) -> usize {
        (0..self.len()).filter(|&i| self.root(i) == i && self.fixed[i].is_none()).count()
    }

    /// Solve the constrained system and expand back to the full DOF vector.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let roots: Vec<usize> = (0..n).map(|i| self.root(i)).collect();
        let mut index = vec![usize::MAX; n];
        let mut m = 0;
        for i in 0..n {
            if roots[i] == i && self.fixed[i].is_none() {
                index[i] = m;
                m += 1;
            }
        }
        let value_of = |i: usize| self.fixed[roots[i]];
        let mut trip = TripletBuilder::new(m, m);
        let mut b = vec![0.0; m];
        for i in 0..n {
            let ri = index[roots[i]];
            if ri == usize::MAX {
                continue;
            }
            b[ri] += self.rhs[i];
            for (j, v) in self.matrix.row(i) {
                match value_of(j) {
                    Some(val) => b[ri] -= v * val,
                    None => trip.add(ri, index[roots[j]], v),
                }
            }
        }
        let a = trip.build();
        let y = solve_direct(&a, &b)?;
        Ok((0..n)
            .map(|i| match value_of(i) {
                Some(v) => v,
                None => y[index[roots[i]]],
            })
            .collect())
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(&adj, &degree, seed);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = 0;
    queue.push_back(start);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let depth = level[last];
    (level, depth)
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut current = seed;
    let (mut level, mut depth) = bfs_levels(adj, current);
    for _ in 0..8 {
        let candidate = (0..adj.len())
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(current);
        let (l2, d2) = bfs_levels(adj, candidate);
        if d2 <= depth {
            break;
        }
        current = candidate;
        level = l2;
        depth = d2;
    }
    current
}

/// LU factors of a banded matrix with row pivoting.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku` so that row swaps never
/// leave the stored window.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    /// Factor a matrix whose nonzeros satisfy `i - kl <= j <= i + ku`.
    pub fn factor(a: &CsrMatrix, kl: usize, ku: usize) -> Result<Self> {
        let n = a.n_rows;
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu { n, kl, ku, width, data: vec![0.0; n * width], pivots: vec![0; n] };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = lu.idx(i, j);
                lu.data[k] += v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = lu.data[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::SingularSystem { pivot: k });
            }
            lu.pivots[k] = p;
            if p != k {
                let len = last_col - k + 1;
                let (ka, pa) = (lu.idx(k, k), lu.idx(p, k));
                for t in 0..len {
                    lu.data.swap(ka + t, pa + t);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            let len = last_col - k;
            let krow = lu.idx(k, k + 1);
            for i in k + 1..=last_row {
                let li = lu.idx(i, k);
                let l = lu.data[li] / pivot;
                lu.data[li] = l;
                if l == 0.0 {
                    continue;
                }
                let irow = lu.idx(i, k + 1);
                // rows i > k, so the k-row slice precedes the i-row slice
                let (head, tail) = lu.data.split_at_mut(irow);
                let src = &head[krow..krow + len];
                for (d, s) in tail[..len].iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[i] -= self.data[self.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut s = x[k];
            let base = self.idx(k, k);
            for (t, j) in (k + 1..=last_col).enumerate() {
                s -= self.data[base + 1 + t] * x[j];
            }
            x[k] = s / self.data[base];
        }
        x
    }
}

/// Reordered band factorization of a square sparse matrix.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    perm: Vec<usize>,
    lu: BandLu,
}

impl DirectSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows;
        let perm = rcm_ordering(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut trip = TripletBuilder::new(n, n);
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
                trip.add(pi, pj, v);
            }
        }
        let lu = BandLu::factor(&trip.build(), kl, ku).map_err(|e| match e {
            Error::SingularSystem { pivot } => Error::SingularSystem { pivot: perm[pivot] },
            other => other,
        })?;
        Ok(Self { perm, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let pb: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        let py = self.lu.solve(&pb);
        let mut x = vec![0.0; b.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = py[new];
        }
        x
    }

    /// Solve with iterative refinement; fails unless `||Ax - b|| <= 1e-10 ||b||`.
    /// Residuals are accumulated in double-word arithmetic, so the refined
    /// solution is accurate to working precision on well-posed systems.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.solve(b);
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let r = residual_compensated(a, &x, b);
            let dx = self.solve(&r);
            let dn = norm2(&dx);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            if dn <= 1e-16 * norm2(&x) || dn > 0.5 * last {
                break;
            }
            last = dn;
        }
        let rel = norm2(&residual_compensated(a, &x, b)) / bn;
        if rel > 1e-10 {
            return Err(Error::ResidualTooLarge { relative: rel });
        }
        Ok(x)
    }
}

/// `b - A x` with error-free products and sums carried in a second word.
fn residual_compensated(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.n_rows)
        .map(|i| {
            let (mut s, mut c) = (b[i], 0.0);
            for (j, v) in a.row(i) {
                let p = v * x[j];
                let e = v.mul_add(x[j], -p);
                let t = s - p;
                let z = t - s;
                let err = (s - (t - z)) + (-p - z);
                s = t;
                c += err - e;
            }
            s + c
        })
        .collect()
}

/// Direct solve of `a x = b`.
pub fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows == 0 {
        return Ok(Vec::new());
    }
    DirectSolver::new(a)?.solve_refined(a, b)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.add(i, i, 2.0);
            if i > 0 {
                t.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.add(i, i + 1, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn identity_returns_rhs() {
        let b: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 1.0).collect();
        let x = solve_direct(&CsrMatrix::identity(7), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn tridiagonal_matches_discrete_quadratic() {
        // -x[i-1] + 2x[i] - x[i+1] = 1 with zero ends: x[i] = (i+1)(n-i)/2
        let n = 100;
        let x = solve_direct(&laplacian_1d(n), &vec![1.0; n]).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let exact = (i as f64 + 1.0) * (n - i) as f64 / 2.0;
            assert!((xi - exact).abs() <= 1e-10 * exact.max(1.0), "{i}: {xi} vs {exact}");
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        let mut t = TripletBuilder::new(3, 3);
        for i in 0..3 {
            t.add(i, i, 0.0);
        }
        let err = solve_direct(&t.build(), &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // saddle-point-like [[0,1],[1,0]]
        let mut t = TripletBuilder::new(2, 2);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        let x = solve_direct(&t.build(), &[3.0, 5.0]).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constraints_fix_and_identify() {
        // 1D Laplacian with x0 = 1, x4 = 0, and x1 == x2 merged.
        let n = 5;
        let mut sys = SparseSystem::new(laplacian_1d(n), vec![0.0; n]);
        sys.fix(0, 1.0).unwrap();
        sys.fix(4, 0.0).unwrap();
        sys.identify(1, 2).unwrap();
        let x = sys.solve().unwrap();
        assert_eq!(x[1], x[2]);
        assert_eq!(sys.reduced_len(), 2);
        assert!(matches!(sys.fix(0, 2.0), Err(Error::ConstraintConflict { .. })));
        assert!(matches!(sys.identify(0, 4), Err(Error::ConstraintConflict { .. })));
    }

    #[test]
    fn rcm_reduces_bandwidth_of_shuffled_path() {
        let n = 50;
        let mut t = TripletBuilder::new(n, n);
        let label = |i: usize| (i * 17) % n;
        for i in 0..n {
            t.add(label(i), label(i), 2.0);
            if i + 1 < n {
                t.add(label(i), label(i + 1), -1.0);
                t.add(label(i + 1), label(i), -1.0);
            }
        }
        let a = t.build();
        let perm = rcm_ordering(&a);
        let mut inv = vec![0; n];
        for (k, &o) in perm.iter().enumerate() {
            inv[o] = k;
        }
        let bw = (0..n)
            .flat_map(|i| a.row(i).map(move |(j, _)| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| (inv[i] as isize - inv[j] as isize).unsigned_abs())
            .max()
            .unwrap();
        assert_eq!(bw, 1);
    }
}
