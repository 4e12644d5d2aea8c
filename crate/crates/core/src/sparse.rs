//! Compressed sparse row storage and a profile (skyline) `L D L^T`
//! factorization with reverse Cuthill-McKee ordering.
//!
//! The factorization does not pivot. It is used on symmetric positive
//! definite matrices and on the quasi-definite block matrix
//! `[[A, C], [C^T, -B]]` with `A`, `B` SPD, which admits an `L D L^T`
//! factorization under every symmetric permutation.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in input order, so the result is a deterministic function of
    /// the triplet sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in sparse product");
        DVector::from_iterator(self.nrows, (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scaled(&self, factor: f64) -> CsrMatrix {
        CsrMatrix { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Bitwise symmetry of values and pattern.
    pub fn is_symmetric_exact(&self) -> bool {
        self.nrows == self.ncols
            && self.triplets().all(|(i, j, v)| self.get(j, i).to_bits() == v.to_bits())
    }

    /// Symmetric block matrix `[[a, c], [c^T, d]]`.
    pub fn block_symmetric(a: &CsrMatrix, c: &CsrMatrix, d: &CsrMatrix) -> Result<CsrMatrix> {
        if a.nrows != a.ncols || d.nrows != d.ncols || c.nrows != a.nrows || c.ncols != d.nrows {
            return Err(invalid("incompatible block shapes"));
        }
        let n = a.nrows;
        let mut t: Vec<(usize, usize, f64)> = a.triplets().collect();
        t.extend(c.triplets().map(|(i, j, v)| (i, n + j, v)));
        t.extend(c.triplets().map(|(i, j, v)| (n + j, i, v)));
        t.extend(d.triplets().map(|(i, j, v)| (n + i, n + j, v)));
        Ok(CsrMatrix::from_triplets(n + d.nrows, n + d.nrows, t))
    }
}

/// Reverse Cuthill-McKee ordering of a structurally symmetric matrix;
/// returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mask: &[bool]| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !mask[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let depth = level[last];
        (level, depth)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start node: repeat BFS from the farthest,
        // lowest-degree node while the eccentricity grows.
        let mut start = seed;
        let (mut level, mut depth) = bfs_levels(start, &visited);
        loop {
            let candidate = (0..n)
                .filter(|&v| level[v] == depth)
                .min_by_key(|&v| (degree[v], v))
                .unwrap_or(start);
            let (l2, d2) = bfs_levels(candidate, &visited);
            if d2 > depth {
                start = candidate;
                level = l2;
                depth = d2;
            } else {
                break;
            }
        }

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A P^T = L D L^T` in profile storage.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    lower: Vec<f64>,
    d: Vec<f64>,
}

/// Pivots below this multiple of the largest diagonal entry are treated as
/// numerically zero.
const PIVOT_TOLERANCE: f64 = 1e-13;

impl LdlFactor {
    /// Factorizes a symmetric matrix (only the lower triangle is read).
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(invalid("factorization needs a square matrix"));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old_i, new_i) in iperm.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let new_j = iperm[old_j];
                if new_j < *new_i {
                    first[*new_i] = first[*new_i].min(new_j);
                }
            }
        }
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; offset[n]];
        let mut d = vec![0.0; n];
        let mut diag_scale = 0.0_f64;
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let new_j = iperm[old_j];
                if new_j < new_i {
                    lower[offset[new_i] + new_j - first[new_i]] += v;
                } else if new_j == new_i {
                    d[new_i] += v;
                }
            }
            diag_scale = diag_scale.max(d[new_i].abs());
        }
        let threshold = PIVOT_TOLERANCE * diag_scale.max(f64::MIN_POSITIVE);

        // Row i holds u_ij = L_ij d_j while the row is being formed.
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(offset[i]);
            let row = &mut rest[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &done[offset[j] + k0 - fj..offset[j] + j - fj];
                let ui = &row[k0 - fi..j - fi];
                let s: f64 = ui.iter().zip(lj).map(|(u, l)| u * l).sum();
                row[j - fi] -= s;
            }
            let mut di = d[i];
            for j in fi..i {
                let u = row[j - fi];
                let l = u / d[j];
                di -= u * l;
                row[j - fi] = l;
            }
            if !(di.abs() > threshold) {
                return Err(Error::SingularSystem(format!(
                    "pivot {i} is {di:e} (threshold {threshold:e})"
                )));
            }
            d[i] = di;
        }
        Ok(Self { perm, first, offset, lower, d })
    }

    /// Factorizes and additionally requires every pivot to be positive.
    pub fn cholesky(a: &CsrMatrix) -> Result<Self> {
        let f = Self::factor(a)?;
        let (_, neg) = f.inertia();
        if neg > 0 {
            return Err(Error::SingularSystem(format!(
                "matrix is not positive definite ({neg} negative pivots)"
            )));
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of positive and negative pivots.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&x| x > 0.0).count();
        (pos, self.d.len() - pos)
    }

    pub fn profile_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "dimension mismatch in factor solve");
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            for (k, l) in row.iter().enumerate() {
                x[fi + k] -= l * xi;
            }
        }
        let mut out = DVector::zeros(n);
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
