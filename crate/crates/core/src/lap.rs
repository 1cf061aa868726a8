//! Exact linear assignment (Hungarian method, shortest augmenting paths
//! with dual potentials).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Square matrix of finite profits; `values[(i, j)]` is the gain of
/// assigning row `i` to column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitMatrix(DMatrix<f64>);

impl ProfitMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::invalid(format!(
                "profit matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("profit matrix has non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.as_ref().len() != n) {
            return Err(Error::invalid("profit matrix must be square"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i].as_ref()[j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    /// `Σ_i values[i][p(i)]`, summed in row order.
    pub fn value_of(&self, p: &Permutation) -> f64 {
        (0..p.len()).map(|i| self.0[(i, p.get(i))]).sum()
    }
}

/// Maximizes `Σ_i profit[i][π(i)]` exactly; returns `π` and the optimum.
///
/// Ties are resolved by the fixed augmentation order (rows ascending, lowest
/// column first), so equal inputs always give equal outputs.
pub fn solve_lap(profit: &ProfitMatrix) -> (Permutation, f64) {
    let n = profit.len();
    let m = profit.matrix();
    // row-major negated profits
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = -m[(i, j)];
        }
    }
    let assignment = min_cost_assignment(&cost, n);
    let p = Permutation::new(assignment).expect("augmenting paths yield a bijection");
    let value = profit.value_of(&p);
    (p, value)
}

/// Minimum-cost assignment on a row-major `n × n` cost array.
///
/// Index 0 of the potential and matching arrays is a virtual column that
/// seeds each augmenting search.
fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // col_owner[j] = row (1-based) assigned to column j, 0 if none
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}
