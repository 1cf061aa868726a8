//! Small dense helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::permutation::Permutation;

/// `ΠᵀBΠ`, i.e. `out[i][j] = b[p(i)][p(j)]`.
pub(crate) fn conjugate(b: &DMatrix<f64>, p: &Permutation) -> DMatrix<f64> {
    let idx = p.as_slice();
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(idx[i], idx[j])])
}

/// Sub-matrix `out[a][c] = b[rows[a]][cols[c]]`.
pub(crate) fn submatrix(b: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, c| b[(rows[a], cols[c])])
}

/// `Σ_ij a[i][j] · b[p(i)][p(j)]`, which is `tr(A Πᵀ B Π)` for symmetric `A`.
pub(crate) fn permuted_trace(a: &DMatrix<f64>, b: &DMatrix<f64>, p: &Permutation) -> f64 {
    let idx = p.as_slice();
    let n = a.nrows();
    let cols = crate::par::map_range(n, |j| {
        let bj = b.column(idx[j]);
        let aj = a.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += aj[i] * bj[idx[i]];
        }
        s
    });
    cols.iter().sum()
}

/// Cholesky factorization plus one step of iterative refinement.
pub(crate) struct SpdSolver<'a> {
    matrix: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> SpdSolver<'a> {
    pub(crate) fn new(matrix: &'a DMatrix<f64>) -> Option<Self> {
        let chol = Cholesky::new(matrix.clone())?;
        // reject factorizations whose pivots underflowed relative to the scale
        let diag = chol.l_dirty().diagonal();
        let max = diag.amax();
        if !(max > 0.0) || diag.iter().any(|&d| !(d > max * 1e-10)) {
            return None;
        }
        Some(Self { matrix, chol })
    }

    pub(crate) fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        let r = rhs - self.matrix * &x;
        x += self.chol.solve(&r);
        x
    }
}
