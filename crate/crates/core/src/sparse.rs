//! Symmetric sparse matrices and envelope factorizations.
//!
//! [`SymCsr`] stores both triangles in compressed rows so that matrix-vector
//! products need no special casing. All form matrices of one space share a
//! single pattern, which makes linear combinations a pass over `val`.
//!
//! [`Envelope`] is a row-envelope (skyline) `L D L^T` factorization in a
//! reverse Cuthill-McKee ordering. It is used both as a Cholesky factor for
//! positive definite matrices and, without pivoting, to count inertia.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (sorted and deduplicated
    /// here). The caller must supply a structurally symmetric set.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col.extend_from_slice(r);
            row_ptr.push(col.len());
        }
        Pattern { n, row_ptr, col }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    /// Reverse Cuthill-McKee ordering, returned as `perm[new] = old`.
    pub fn rcm(&self) -> Vec<usize> {
        let n = self.n;
        let degree: Vec<usize> = (0..n).map(|i| self.row(i).len()).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&i| (degree[i], i));
        for &seed in &by_degree {
            if visited[seed] {
                continue;
            }
            let start = self.pseudo_peripheral(seed, &degree);
            let mut queue = VecDeque::new();
            visited[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nbrs: Vec<usize> = self
                    .row(v)
                    .iter()
                    .copied()
                    .filter(|&w| !visited[w])
                    .collect();
                nbrs.sort_by_key(|&w| (degree[w], w));
                for w in nbrs {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        order
    }

    fn bfs_levels(&self, start: usize) -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        level[start] = 0;
        queue.push_back(start);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in self.row(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let depth = level[last];
        (level, depth)
    }

    fn pseudo_peripheral(&self, seed: usize, degree: &[usize]) -> usize {
        let mut current = seed;
        let (mut level, mut depth) = self.bfs_levels(current);
        for _ in 0..8 {
            let candidate = (0..self.n)
                .filter(|&v| level[v] == depth)
                .min_by_key(|&v| (degree[v], v))
                .unwrap_or(current);
            let (l2, d2) = self.bfs_levels(candidate);
            if d2 <= depth {
                break;
            }
            current = candidate;
            level = l2;
            depth = d2;
        }
        current
    }
}

/// Symmetric matrix in full compressed-row storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymCsr {
    pattern: Arc<Pattern>,
    val: Vec<f64>,
}

impl SymCsr {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let val = vec![0.0; pattern.nnz()];
        SymCsr { pattern, val }
    }

    /// Sparse copy of a dense matrix, keeping the entries with `|a_ij| > 0`
    /// in either triangle. The upper triangle is mirrored.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            for j in i..n {
                if m[(i, j)] != 0.0 || m[(j, i)] != 0.0 || i == j {
                    rows[i].push(j);
                    if i != j {
                        rows[j].push(i);
                    }
                }
            }
        }
        let pattern = Arc::new(Pattern::from_rows(rows));
        let mut out = SymCsr::zeros(pattern);
        for i in 0..n {
            for j in i..n {
                if let Some(k) = out.pattern.find(i, j) {
                    out.val[k] = m[(i, j)];
                    let k2 = out.pattern.find(j, i).unwrap();
                    out.val[k2] = m[(i, j)];
                }
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.val[k])
    }

    /// Adds `v` to entry `(i, j)` only; callers keep symmetry themselves.
    ///
    /// # Panics
    /// If `(i, j)` is not in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .expect("entry outside sparsity pattern");
        self.val[k] += v;
    }

    /// `sum_k c_k M_k` over matrices that share this pattern.
    pub fn combine(terms: &[(f64, &SymCsr)]) -> SymCsr {
        let first = terms.first().expect("at least one term").1;
        let mut val = vec![0.0; first.val.len()];
        for (c, m) in terms {
            assert!(Arc::ptr_eq(&m.pattern, &first.pattern) || m.pattern == first.pattern);
            for (o, &x) in val.iter_mut().zip(&m.val) {
                *o += c * x;
            }
        }
        SymCsr {
            pattern: first.pattern.clone(),
            val,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate().take(p.n) {
            *yi = (p.row_ptr[i]..p.row_ptr[i + 1])
                .map(|k| self.val[k] * x[p.col[k]])
                .sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T M y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mul(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|m_ij - m_ji|` over the stored entries.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut worst = 0.0_f64;
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col[k];
                let other = p.find(j, i).map_or(f64::INFINITY, |k2| self.val[k2]);
                worst = worst.max((self.val[k] - other).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = &self.pattern;
        let mut m = DMatrix::zeros(p.n, p.n);
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                m[(i, p.col[k])] = self.val[k];
            }
        }
        m
    }

    /// Stored entries with `i <= j`, sorted by `(i, j)`.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let p = &self.pattern;
        let mut out = Vec::new();
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                if p.col[k] >= i {
                    out.push((i, p.col[k], self.val[k]));
                }
            }
        }
        out
    }
}

/// Result of an attempted `L D L^T` factorization.
#[derive(Clone, Debug)]
pub struct Envelope {
    n: usize,
    /// `perm[new] = old`.
    perm: Arc<Vec<usize>>,
    first: Vec<usize>,
    start: Vec<usize>,
    /// Row `i` holds `l_{i,first[i]} .. l_{i,i-1}` followed by `d_i`.
    vals: Vec<f64>,
}

/// Why a positive-definite factorization stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PivotFailure {
    /// Row in the original numbering.
    pub index: usize,
    pub value: f64,
}

impl Envelope {
    /// Allocates the envelope of `m` under `perm` and copies its entries.
    fn load(m: &SymCsr, perm: Arc<Vec<usize>>) -> Self {
        let n = m.n();
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let p = m.pattern();
        let mut first = vec![0; n];
        for new in 0..n {
            let old = perm[new];
            first[new] = p
                .row(old)
                .iter()
                .map(|&c| iperm[c])
                .filter(|&c| c <= new)
                .min()
                .unwrap_or(new);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, f) in first.iter().enumerate().take(n) {
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        let mut vals = vec![0.0; total];
        for new in 0..n {
            let old = perm[new];
            for k in p.row_ptr[old]..p.row_ptr[old + 1] {
                let c = iperm[p.col[k]];
                if c <= new {
                    vals[start[new] + c - first[new]] = m.val[k];
                }
            }
        }
        Envelope {
            n,
            perm,
            first,
            start,
            vals,
        }
    }

    /// Row-oriented Crout elimination. `stop` is called with each pivot
    /// and may abort the factorization by returning `true`.
    fn eliminate(&mut self, mut stop: impl FnMut(usize, f64) -> bool) -> Option<usize> {
        let mut work = Vec::new();
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let len = i - fi;
            work.clear();
            work.extend_from_slice(&self.vals[si..si + len]);
            // work[j - fi] becomes g_ij = l_ij d_j
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let lo = fi.max(fj);
                let mut s = 0.0;
                let gi = &work[lo - fi..j - fi];
                let lj = &self.vals[sj + lo - fj..sj + j - fj];
                for (a, b) in gi.iter().zip(lj) {
                    s += a * b;
                }
                work[j - fi] -= s;
            }
            let mut d = self.vals[si + len];
            for j in fi..i {
                let dj = self.vals[self.start[j] + j - self.first[j]];
                let g = work[j - fi];
                let l = g / dj;
                d -= g * l;
                self.vals[si + j - fi] = l;
            }
            self.vals[si + len] = d;
            if stop(i, d) {
                return Some(i);
            }
        }
        None
    }

    /// Cholesky-type factorization; fails at the first non-positive pivot.
    pub fn cholesky(m: &SymCsr, perm: Arc<Vec<usize>>) -> Result<Self, PivotFailure> {
        let scale = diag_scale(m);
        let mut env = Envelope::load(m, perm);
        let tol = scale * 1e-14;
        let failed = env.eliminate(|_, d| d.is_nan() || d <= tol);
        match failed {
            Some(i) => Err(PivotFailure {
                index: env.perm[i],
                value: env.vals[env.start[i] + i - env.first[i]],
            }),
            None => Ok(env),
        }
    }

    /// `L D L^T` without pivoting, for inertia counts.
    pub fn ldlt(m: &SymCsr, perm: Arc<Vec<usize>>) -> Self {
        let mut env = Envelope::load(m, perm);
        env.eliminate(|_, _| false);
        env
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.vals[self.start[i] + i - self.first[i]]
    }

    /// `(n_neg, n_zero, n_pos)` of the pivots, with `|d| <= tol` counted as
    /// zero.
    pub fn inertia(&self, tol: f64) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for i in 0..self.n {
            let d = self.diag(i);
            if d.abs() <= tol || !d.is_finite() {
                c.1 += 1;
            } else if d < 0.0 {
                c.0 += 1;
            } else {
                c.2 += 1;
            }
        }
        c
    }

    /// Smallest pivot magnitude relative to the largest.
    pub fn min_pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..self.n {
            let d = self.diag(i).abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi > 0.0 {
            lo / hi
        } else {
            0.0
        }
    }

    pub fn stored(&self) -> usize {
        self.vals.len()
    }

    /// Solves `L z = b` in place on a permuted vector.
    fn forward(&self, z: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.vals[si..si + i - fi];
            let s: f64 = row.iter().zip(&z[fi..i]).map(|(a, b)| a * b).sum();
            z[i] -= s;
        }
    }

    /// Solves `L^T x = y` in place on a permuted vector.
    fn backward(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = x[i];
            if xi != 0.0 {
                let row = &self.vals[si..si + i - fi];
                for (o, a) in x[fi..i].iter_mut().zip(row) {
                    *o -= a * xi;
                }
            }
        }
    }

    /// With `M = F F^T`, `F = P^T L D^{1/2}`: returns `F^{-1} b`.
    /// Only meaningful for factorizations with positive pivots.
    pub fn solve_f(&self, b: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        self.forward(&mut z);
        for (i, v) in z.iter_mut().enumerate() {
            *v /= self.diag(i).sqrt();
        }
        z
    }

    /// Returns `F^{-T} y`.
    pub fn solve_ft(&self, y: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, v)| v / self.diag(i).sqrt())
            .collect();
        self.backward(&mut x);
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solves `M x = b` using the `L D L^T` factors.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        self.forward(&mut z);
        for (i, v) in z.iter_mut().enumerate() {
            *v /= self.diag(i);
        }
        self.backward(&mut z);
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = z[new];
        }
        out
    }
}

/// Largest absolute diagonal entry, used to scale pivot tolerances.
pub fn diag_scale(m: &SymCsr) -> f64 {
    (0..m.n())
        .map(|i| m.get(i, i).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
}
