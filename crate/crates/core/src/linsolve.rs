//! Sparse Gaussian elimination for policy evaluation systems.
//!
//! `I − γ·P` with `P` row-stochastic and `γ < 1` is strictly diagonally
//! dominant by rows, so elimination without pivoting is well-defined and every
//! Schur complement stays dominant.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Sparse square system stored by rows.
pub(crate) struct SparseSystem {
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Solves `A x = b` by up-looking LU. Returns `None` when the factor would
/// exceed `fill_limit` stored entries or a pivot vanishes.
pub(crate) fn solve(system: &SparseSystem, rhs: &[f64], fill_limit: usize) -> Option<Vec<f64>> {
    let n = system.rows.len();
    assert_eq!(rhs.len(), n);
    // upper factor rows: (pivot, strictly-upper entries)
    let mut upper: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(n);
    let mut y = rhs.to_vec();
    let mut work = vec![0.0f64; n];
    let mut touched = vec![false; n];
    let mut pending: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut stored = 0usize;

    for i in 0..n {
        cols.clear();
        for &(j, v) in &system.rows[i] {
            if !touched[j] {
                touched[j] = true;
                cols.push(j);
                if j < i {
                    pending.push(Reverse(j));
                }
            }
            work[j] += v;
        }
        // eliminate columns below the diagonal in increasing order; the
        // pivot rows may introduce new columns, possibly also below i
        while let Some(Reverse(k)) = pending.pop() {
            let wk = work[k];
            if wk == 0.0 {
                continue;
            }
            let (pivot, ref urow) = upper[k];
            let l = wk / pivot;
            y[i] -= l * y[k];
            for &(j, u) in urow {
                if !touched[j] {
                    touched[j] = true;
                    cols.push(j);
                    if j < i {
                        pending.push(Reverse(j));
                    }
                }
                work[j] -= l * u;
            }
        }
        let pivot = work[i];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        let mut urow: Vec<(usize, f64)> = cols.iter().filter(|&&j| j > i && work[j] != 0.0).map(|&j| (j, work[j])).collect();
        urow.sort_unstable_by_key(|e| e.0);
        stored += urow.len() + 1;
        if stored > fill_limit {
            return None;
        }
        for &j in &cols {
            work[j] = 0.0;
            touched[j] = false;
        }
        upper.push((pivot, urow));
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let (pivot, ref urow) = upper[i];
        let s: f64 = urow.iter().map(|&(j, u)| u * x[j]).sum();
        x[i] = (y[i] - s) / pivot;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(sys: &SparseSystem, x: &[f64], b: &[f64]) -> f64 {
        sys.rows
            .iter()
            .zip(b)
            .map(|(row, bi)| (row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dense_dominant_system() {
        let sys = SparseSystem {
            rows: vec![
                vec![(0, 4.0), (1, -1.0), (2, -1.0)],
                vec![(0, -2.0), (1, 5.0), (2, -1.0)],
                vec![(0, -1.0), (1, -1.0), (2, 3.0)],
            ],
        };
        let b = [1.0, 2.0, 3.0];
        let x = solve(&sys, &b, 100).unwrap();
        assert!(residual(&sys, &x, &b) < 1e-12);
    }

    #[test]
    fn fill_in_from_lower_columns() {
        // row 3 reaches column 0, whose pivot row introduces column 1 < 3
        let sys = SparseSystem {
            rows: vec![
                vec![(0, 3.0), (1, -1.0)],
                vec![(1, 3.0), (2, -1.0)],
                vec![(2, 3.0), (3, -1.0)],
                vec![(0, -1.0), (3, 3.0)],
            ],
        };
        let b = [1.0, 0.0, 0.0, 1.0];
        let x = solve(&sys, &b, 100).unwrap();
        assert!(residual(&sys, &x, &b) < 1e-12);
    }

    #[test]
    fn fill_limit_aborts() {
        let sys = SparseSystem { rows: vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0)]] };
        assert!(solve(&sys, &[1.0, 1.0], 2).is_none());
    }
}
