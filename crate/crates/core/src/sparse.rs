//! Compressed sparse row matrices.

use crate::par::{self, Execution};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T = f64> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Clone> CsrMatrix<T> {
    /// Builds from per-row entry lists. Each row must be sorted by column with
    /// no duplicates.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let n_rows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "row not sorted/deduplicated");
            for (c, v) in row {
                debug_assert!(c < n_cols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows, n_cols, indptr, indices, values }
    }

    /// Same sparsity pattern as `self`, new values.
    pub fn with_values<U>(&self, values: Vec<U>) -> CsrMatrix<U> {
        assert_eq!(values.len(), self.values.len());
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> CsrMatrix<U> {
        self.with_values(self.values.iter().map(f).collect())
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

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, &T)> + '_ {
        let (cols, vals) = self.row(i);
        cols.iter().copied().zip(vals)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| &vals[k])
    }

    pub fn same_pattern<U>(&self, other: &CsrMatrix<U>) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl CsrMatrix<f64> {
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.n_rows == self.n_cols
            && self.nnz() == self.n_rows
            && (0..self.n_rows).all(|i| self.row(i) == (&[i][..], &[1.0][..]))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// First row whose sum deviates from 1 by more than `tol`.
    pub fn first_non_stochastic_row(&self, tol: f64) -> Option<(usize, f64)> {
        (0..self.n_rows).map(|i| (i, self.row_sum(i))).find(|(_, s)| (s - 1.0).abs() > tol || !s.is_finite())
    }

    /// Row `i` of `self * rhs`, sorted by column.
    pub fn row_product(&self, rhs: &CsrMatrix<f64>, i: usize) -> Vec<(usize, f64)> {
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for (k, a) in self.row_entries(i) {
            for (j, b) in rhs.row_entries(k) {
                acc.push((j, a * b));
            }
        }
        merge_sorted(acc)
    }

    pub fn mul(&self, rhs: &CsrMatrix<f64>, exec: Execution) -> CsrMatrix<f64> {
        assert_eq!(self.n_cols, rhs.n_rows, "dimension mismatch");
        if rhs.is_identity() {
            return self.clone();
        }
        let rows = par::map_range(exec, self.n_rows, |i| self.row_product(rhs, i));
        CsrMatrix::from_rows(rhs.n_cols, rows)
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row_entries(i).map(|(j, p)| p * v[j]).sum()).collect()
    }

    /// Dense copy, for small matrices in tests and debugging.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row_entries(i) {
                row[j] += *v;
            }
        }
        out
    }
}

/// Sorts by column (stably) and sums duplicate columns in encounter order.
pub(crate) fn merge_sorted(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
        let n = rows.len();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn product_matches_dense() {
        let a = m(vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]]);
        let b = m(vec![vec![(1, 1.0)], vec![(0, 0.25), (1, 0.75)]]);
        let c = a.mul(&b, Execution::Sequential).to_dense();
        assert_eq!(c, vec![vec![0.125, 0.875], vec![0.25, 0.75]]);
        assert_eq!(a.mul(&b, Execution::Parallel).to_dense(), c);
    }

    #[test]
    fn identity_is_neutral() {
        let a = m(vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]]);
        let id = CsrMatrix::identity(2);
        assert!(id.is_identity());
        assert_eq!(a.mul(&id, Execution::Sequential), a);
        assert_eq!(id.mul(&a, Execution::Sequential), a);
    }

    #[test]
    fn stochastic_check() {
        let a = m(vec![vec![(0, 0.5), (1, 0.4)], vec![(1, 1.0)]]);
        assert_eq!(a.first_non_stochastic_row(1e-9).map(|r| r.0), Some(0));
        assert_eq!(a.get(0, 1), Some(&0.4));
        assert_eq!(a.get(1, 0), None);
    }
}
