//! Compressed sparse row storage with a deterministic, element-driven
//! assembly path.

use std::fmt::Write as _;

/// Anything that can act on a vector. Operators are square.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the sparsity pattern from a list of dense index blocks: every
    /// pair `(i, j)` with `i, j` in the same block is a structural nonzero.
    pub fn from_blocks<'a, I>(n: usize, blocks: I) -> Self
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for block in blocks {
            for &i in block {
                rows[i].extend(block.iter().map(|&j| j as u32));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n_rows: n, n_cols: n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Builds a matrix from unsorted triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            rows[i].push((j as u32, v));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&(j as u32)).ok().map(|p| a + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds into a structural nonzero. Panics if `(i, j)` is not in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside sparsity pattern"));
        self.values[p] += v;
    }

    /// Scatter-adds a dense row-major `ids.len() x ids.len()` block.
    pub fn add_block(&mut self, ids: &[usize], block: &[f64]) {
        let n = ids.len();
        debug_assert_eq!(block.len(), n * n);
        for (a, &i) in ids.iter().enumerate() {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let cols = &self.col_idx[start..end];
            for (b, &j) in ids.iter().enumerate() {
                let v = block[a * n + b];
                if v != 0.0 {
                    let p = cols
                        .binary_search(&(j as u32))
                        .unwrap_or_else(|_| panic!("({i}, {j}) outside sparsity pattern"));
                    self.values[start + p] += v;
                }
            }
        }
    }

    /// Replaces rows and columns of `ids` by identity rows/columns.
    pub fn apply_dirichlet(&mut self, is_dirichlet: &[bool]) {
        for i in 0..self.n_rows {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for p in a..b {
                let j = self.col_idx[p] as usize;
                if is_dirichlet[i] || is_dirichlet[j] {
                    self.values[p] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n_rows) {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for p in a..b {
                s += self.values[p] * x[self.col_idx[p] as usize];
            }
            *yi = s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((j as usize, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, &trip)
    }

    /// Lower and upper bandwidths under the given row/column permutation
    /// (`perm[i]` is the new position of index `i`).
    pub fn bandwidths(&self, perm: &[usize]) -> (usize, usize) {
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..self.n_rows {
            let pi = perm[i];
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v == 0.0 && j as usize != i {
                    continue;
                }
                let pj = perm[j as usize];
                if pj < pi {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        (kl, ku)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Zeroes the stored values, keeping the pattern.
    pub fn clear_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_assembly_sums_overlaps() {
        let blocks: Vec<Vec<usize>> = vec![vec![0, 1], vec![1, 2]];
        let mut a = CsrMatrix::from_blocks(3, blocks.iter().map(|b| b.as_slice()));
        for b in &blocks {
            a.add_block(b, &[1.0, -1.0, -1.0, 1.0]);
        }
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.nnz(), 7);
        let mut y = vec![0.0; 3];
        a.matvec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn triplets_and_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5)]);
        assert_eq!(a.get(0, 2), 1.5);
        let t = a.transpose();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.get(0, 1), 2.0);
    }

    #[test]
    fn dirichlet_rows_become_identity() {
        let blocks: Vec<Vec<usize>> = vec![vec![0, 1, 2]];
        let mut a = CsrMatrix::from_blocks(3, blocks.iter().map(|b| b.as_slice()));
        a.add_block(&blocks[0], &[2.0, -1.0, 0.5, -1.0, 2.0, -1.0, 0.5, -1.0, 2.0]);
        a.apply_dirichlet(&[false, false, true]);
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(2, 0), 0.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.get(0, 1), -1.0);
    }
}
