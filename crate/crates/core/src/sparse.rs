//! Symmetric positive-definite solves with an envelope (skyline) Cholesky
//! factorization under reverse Cuthill-McKee ordering.
//!
//! Network matrices are sparse with a narrow profile once reordered, so the
//! envelope scheme is small, allocation-free after setup and deterministic.

use std::collections::VecDeque;

/// Reverse Cuthill-McKee permutation: `order[k]` is the original index placed
/// at position `k`. Each connected component starts from a minimum-degree
/// node; ties break on the lower index so the result is deterministic.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v]
                .iter()
                .copied()
                .filter(|&u| !visited[u])
                .collect();
            next.sort_by_key(|&u| (degree[u], u));
            next.dedup();
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// The factorization hit a non-positive pivot at the given original index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite(pub usize);

/// A symmetric matrix stored row by row from the first structural non-zero
/// up to the diagonal, in permuted order. Assemble with [`add`](Self::add),
/// then call [`factor_solve`](Self::factor_solve).
#[derive(Debug, Clone)]
pub struct ProfileMatrix {
    /// `perm[original] = position`.
    perm: Vec<usize>,
    order: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl ProfileMatrix {
    /// Symbolic setup for an `n × n` matrix whose off-diagonal structure is
    /// the given list of index pairs.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in pairs {
            if i != j {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        let order = reverse_cuthill_mckee(&adjacency);
        let mut perm = vec![0; n];
        for (pos, &orig) in order.iter().enumerate() {
            perm[orig] = pos;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j) in pairs {
            let (a, b) = (perm[i], perm[j]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for (row, &f) in first.iter().enumerate() {
            offset.push(offset[row] + row - f + 1);
        }
        let size = offset[n];
        ProfileMatrix {
            perm,
            order,
            first,
            offset,
            values: vec![0.0; size],
            scratch: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Add `v` to entry `(i, j)` and, implicitly, `(j, i)`. Indices are
    /// original. Off-diagonal pairs must belong to the symbolic structure.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = (self.perm[i], self.perm[j]);
        let (col, row) = if a < b { (a, b) } else { (b, a) };
        debug_assert!(col >= self.first[row], "entry outside the envelope");
        self.values[self.offset[row] + col - self.first[row]] += v;
    }

    /// Factor in place and solve `A x = rhs`, overwriting `rhs` with `x`.
    pub fn factor_solve(&mut self, rhs: &mut [f64]) -> Result<(), NotPositiveDefinite> {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        for row in 0..n {
            let fr = self.first[row];
            let base_r = self.offset[row];
            for col in fr..row {
                let fc = self.first[col];
                let base_c = self.offset[col];
                let start = fr.max(fc);
                let mut s = self.values[base_r + col - fr];
                for k in start..col {
                    s -= self.values[base_r + k - fr] * self.values[base_c + k - fc];
                }
                let diag = self.values[base_c + col - fc];
                self.values[base_r + col - fr] = s / diag;
            }
            let mut d = self.values[base_r + row - fr];
            for k in fr..row {
                let l = self.values[base_r + k - fr];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(NotPositiveDefinite(self.order[row]));
            }
            self.values[base_r + row - fr] = d.sqrt();
        }

        let y = &mut self.scratch;
        for (pos, &orig) in self.order.iter().enumerate() {
            y[pos] = rhs[orig];
        }
        // L y = b
        for row in 0..n {
            let fr = self.first[row];
            let base = self.offset[row];
            let mut s = y[row];
            for (l, yk) in self.values[base..base + row - fr].iter().zip(&y[fr..row]) {
                s -= l * yk;
            }
            y[row] = s / self.values[base + row - fr];
        }
        // Lᵀ x = y, column sweep over the row-stored factor.
        for row in (0..n).rev() {
            let fr = self.first[row];
            let base = self.offset[row];
            y[row] /= self.values[base + row - fr];
            let xr = y[row];
            for (yk, l) in y[fr..row].iter_mut().zip(&self.values[base..base + row - fr]) {
                *yk -= l * xr;
            }
        }
        for (pos, &orig) in self.order.iter().enumerate() {
            rhs[orig] = y[pos];
        }
        Ok(())
    }
}
