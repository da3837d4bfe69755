//! Sparse storage and the envelope (profile) Cholesky factorization used for every
//! GMRF solve.
//!
//! Symmetric positive-definite systems are reordered with reverse Cuthill-McKee and
//! factored in envelope storage: row `i` of the lower triangle is kept densely from its
//! first structural nonzero up to the diagonal. Fill stays inside the envelope, which
//! also makes the Takahashi recursions for selected inversion closed over the stored
//! entries.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Compressed sparse row matrix with sorted column indices and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept as structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut slots = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[slots[r]] = c;
            vals[slots[r]] = v;
            slots[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            order.clear();
            order.extend(counts[r]..counts[r + 1]);
            order.sort_by_key(|&k| cols[k]);
            let row_start = indices.len();
            for &k in &order {
                if indices.len() > row_start && *indices.last().unwrap() == cols[k] {
                    *data.last_mut().unwrap() += vals[k];
                } else {
                    indices.push(cols[k]);
                    data.push(vals[k]);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Position of `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.indptr[i] + k)
    }

    /// Iterator over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let span = self.indptr[i]..self.indptr[i + 1];
            span.map(move |k| (i, self.indices[k], self.data[k]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `selfᵀ x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * xi;
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Sparse product `self · other` (row-wise Gustavson accumulation).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }
    }

    /// Returns a copy with column `j` multiplied by `scale[j]`.
    pub fn scale_columns(&self, scale: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for (k, v) in out.data.iter_mut().enumerate() {
            *v *= scale[out.indices[k]];
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|` over stored entries; `None` when not square.
    pub fn asymmetry(&self) -> Option<f64> {
        if self.nrows != self.ncols {
            return None;
        }
        Some(self.iter().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max))
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            out[i * self.ncols + j] += v;
        }
        out
    }

    /// Adjacency lists of the off-diagonal structure (square matrices only).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nrows];
        for (i, j, _) in self.iter() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// `perm[new] = old`, `inverse[old] = new`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { perm: (0..n).collect(), inverse: (0..n).collect() }
    }

    /// From a list giving the old index at each new position.
    pub fn from_order(perm: Vec<usize>) -> Self {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            assert!(inverse[old] == usize::MAX, "not a permutation");
            inverse[old] = new;
        }
        Permutation { perm, inverse }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// New position of original index `old`.
    pub fn new_index(&self, old: usize) -> usize {
        self.inverse[old]
    }

    /// Original index stored at position `new`.
    pub fn old_index(&self, new: usize) -> usize {
        self.perm[new]
    }

    /// `out[new] = x[old]`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    /// Inverse of [`Permutation::apply`].
    pub fn unapply(&self, x: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&new| x[new]).collect()
    }
}

/// Reverse Cuthill-McKee ordering of a graph given by adjacency lists.
///
/// Each connected component is started from a pseudo-peripheral vertex (George-Liu);
/// neighbors are visited by increasing degree with ties broken by index, so the
/// result is deterministic.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Permutation {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut scratch: Vec<usize> = Vec::new();

    // Breadth-first levels from `root`; returns (eccentricity, last level members).
    let bfs_levels = |root: usize, level: &mut [usize], visited: &[bool]| -> (usize, Vec<usize>) {
        let mut touched = vec![root];
        level[root] = 0;
        let mut head = 0;
        let mut depth = 0;
        while head < touched.len() {
            let v = touched[head];
            head += 1;
            depth = depth.max(level[v]);
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    touched.push(w);
                }
            }
        }
        let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == depth).collect();
        for &v in &touched {
            level[v] = usize::MAX;
        }
        (depth, last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Minimum-degree vertex of this component as the initial root.
        let mut members = vec![seed];
        level[seed] = 0;
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = 0;
                    members.push(w);
                }
            }
        }
        for &v in &members {
            level[v] = usize::MAX;
        }
        let mut root = *members.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
        let (mut ecc, mut last) = bfs_levels(root, &mut level, &visited);
        loop {
            let candidate = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (cand_ecc, cand_last) = bfs_levels(candidate, &mut level, &visited);
            if cand_ecc > ecc {
                root = candidate;
                ecc = cand_ecc;
                last = cand_last;
            } else {
                break;
            }
        }

        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            scratch.clear();
            scratch.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            scratch.sort_unstable_by_key(|&w| (degree[w], w));
            for &w in &scratch {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    Permutation::from_order(order)
}

/// Symmetric matrix in envelope storage (lower triangle, row `i` dense from
/// `first[i]` through the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Envelope {
    /// All-zero envelope with the given per-row first columns (`first[i] <= i`).
    pub fn zeros(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        start.push(0);
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope row {i} starts after its diagonal");
            start.push(start[i] + (i - f + 1));
        }
        let len = *start.last().unwrap();
        Envelope { first, start, values: vec![0.0; len] }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored lower-triangle entries.
    pub fn stored(&self) -> usize {
        self.values.len()
    }

    pub fn first(&self, i: usize) -> usize {
        self.first[i]
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if c < self.first[r] {
            None
        } else {
            Some(self.start[r] + c - self.first[r])
        }
    }

    /// Whether `(i, j)` lies inside the envelope (either triangle).
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.slot(i, j).is_some()
    }

    /// Symmetric read; zero outside the envelope.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to the symmetric entry `(i, j)`.
    ///
    /// Panics when the entry lies outside the envelope.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside envelope");
        self.values[k] += v;
    }

    /// Stored lower-triangle row `i` (columns `first(i)..=i`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    /// Factors in place into `L` with `L Lᵀ = self`.
    pub fn cholesky(mut self) -> Result<Cholesky, LinalgError> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let (done, rest) = self.values.split_at_mut(self.start[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let row_j = &done[self.start[j]..self.start[j + 1]];
                let mut s = row_i[j - fi];
                s -= dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = s / row_j[j - fj];
            }
            let off = &row_i[..i - fi];
            let d = row_i[i - fi] - dot(off, off);
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: i, value: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Cholesky { l: self })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Lower-triangular Cholesky factor in envelope storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Envelope,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn factor(&self) -> &Envelope {
        &self.l
    }

    #[inline]
    fn diag(&self, i: usize) -> f64 {
        let row = self.l.row(i);
        row[row.len() - 1]
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.diag(i).ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim());
        for i in 0..self.dim() {
            let fi = self.l.first[i];
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i - fi], &b[fi..i]);
            b[i] = s / row[i - fi];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        assert_eq!(y.len(), self.dim());
        for i in (0..self.dim()).rev() {
            let fi = self.l.first[i];
            let row = self.l.row(i);
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, &lik) in (fi..i).zip(&row[..i - fi]) {
                y[k] -= lik * xi;
            }
        }
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Entries of `(L Lᵀ)⁻¹` on the envelope (Takahashi recursions).
    pub fn selected_inverse(&self) -> Envelope {
        let n = self.dim();
        let l = &self.l;
        // column lists: rows k > j with L[k, j] inside the envelope
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];
        for k in 0..n {
            for j in l.first[k]..k {
                columns[j].push(k);
            }
        }
        let mut sigma = Envelope::zeros(l.first.clone());
        let mut work: Vec<f64> = Vec::new();
        for j in (0..n).rev() {
            let ljj = self.diag(j);
            let col = &columns[j];
            work.clear();
            work.extend(col.iter().map(|&k| l.get(k, j)));
            for &i in col {
                let mut s = 0.0;
                for (&k, &lkj) in col.iter().zip(&work) {
                    s += sigma.get(i, k) * lkj;
                }
                let k = sigma.slot(i, j).unwrap();
                sigma.values[k] = -s / ljj;
            }
            let mut s = 0.0;
            for (&k, &lkj) in col.iter().zip(&work) {
                s += sigma.get(j, k) * lkj;
            }
            let k = sigma.slot(j, j).unwrap();
            sigma.values[k] = (1.0 / ljj - s) / ljj;
        }
        sigma
    }
}

/// Fill-reducing ordering plus envelope layout for a fixed sparsity pattern, reused
/// across numeric refactorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicEnvelope {
    perm: Permutation,
    first: Vec<usize>,
}

impl SymbolicEnvelope {
    /// Envelope for the pattern `adj` under an explicit permutation.
    pub fn with_permutation(adj: &[Vec<usize>], perm: Permutation) -> Self {
        let n = adj.len();
        assert_eq!(perm.len(), n);
        let mut first: Vec<usize> = (0..n).collect();
        for (old, list) in adj.iter().enumerate() {
            let i = perm.new_index(old);
            for &w in list {
                let j = perm.new_index(w);
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        SymbolicEnvelope { perm, first }
    }

    /// Reverse Cuthill-McKee ordering of the pattern.
    pub fn analyze(adj: &[Vec<usize>]) -> Self {
        Self::with_permutation(adj, reverse_cuthill_mckee(adj))
    }

    /// Marks rows (by permuted position) as dense from column zero.
    pub fn make_rows_dense(&mut self, permuted_rows: impl IntoIterator<Item = usize>) {
        for i in permuted_rows {
            self.first[i] = 0;
        }
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Empty envelope in permuted coordinates.
    pub fn zeros(&self) -> Envelope {
        Envelope::zeros(self.first.clone())
    }

    /// Stored entries per factorization.
    pub fn envelope_size(&self) -> usize {
        self.first.iter().enumerate().map(|(i, &f)| i - f + 1).sum()
    }
}

/// Cholesky factorization of a sparse SPD matrix together with its ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCholesky {
    perm: Permutation,
    chol: Cholesky,
}

impl SparseCholesky {
    /// Orders with reverse Cuthill-McKee and factors.
    pub fn factor(matrix: &CsrMatrix) -> Result<Self, LinalgError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(LinalgError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let symbolic = SymbolicEnvelope::analyze(&matrix.adjacency());
        Self::factor_with(&symbolic, matrix)
    }

    /// Factors using a precomputed ordering whose envelope covers the pattern.
    pub fn factor_with(symbolic: &SymbolicEnvelope, matrix: &CsrMatrix) -> Result<Self, LinalgError> {
        let mut env = symbolic.zeros();
        let perm = symbolic.permutation();
        for (i, j, v) in matrix.iter() {
            if j <= i {
                env.add(perm.new_index(i), perm.new_index(j), v);
            }
        }
        Self::from_permuted(perm.clone(), env)
    }

    /// Factors an envelope that is already in the permuted coordinates of `perm`.
    pub fn from_permuted(perm: Permutation, env: Envelope) -> Result<Self, LinalgError> {
        let chol = env.cholesky()?;
        Ok(SparseCholesky { perm, chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// Solves `A x = b` in the original coordinates.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.chol.solve(&self.perm.apply(b));
        self.perm.unapply(&x)
    }

    /// `vᵀ A⁻¹ v` for a sparse vector given as `(index, value)` pairs.
    pub fn inverse_quadratic_form(&self, entries: &[(usize, f64)]) -> f64 {
        let mut rhs = vec![0.0; self.dim()];
        for &(j, v) in entries {
            rhs[self.perm.new_index(j)] += v;
        }
        self.chol.solve_lower_in_place(&mut rhs);
        rhs.iter().map(|v| v * v).sum()
    }

    /// Draws `x ~ N(0, A⁻¹)` from a vector of independent standard normals.
    pub fn sample(&self, standard_normals: &[f64]) -> Vec<f64> {
        assert_eq!(standard_normals.len(), self.dim());
        let mut x = standard_normals.to_vec();
        self.chol.solve_upper_in_place(&mut x);
        self.perm.unapply(&x)
    }

    /// Selected inverse in permuted coordinates; use [`SelectedInverse`] for lookups
    /// by original index.
    pub fn selected_inverse(&self) -> SelectedInverse {
        SelectedInverse { perm: self.perm.clone(), sigma: self.chol.selected_inverse() }
    }
}

/// Entries of `A⁻¹` restricted to the factor's envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedInverse {
    perm: Permutation,
    sigma: Envelope,
}

impl SelectedInverse {
    /// `(A⁻¹)_{ij}` by original indices, or `None` when outside the envelope.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = (self.perm.new_index(i), self.perm.new_index(j));
        self.sigma.slot(a, b).map(|k| self.sigma.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.sigma.dim()).map(|i| self.get(i, i).unwrap()).collect()
    }
}
