use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_same_len, Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::{permuted_trace, SpdSolver};
use crate::model::LambdaPlacement;
use crate::permutation::Permutation;

/// Fitted least-squares density-ratio weights for one pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmiFit {
    pub alpha: DVector<f64>,
    pub h: DVector<f64>,
    pub lambda: f64,
    /// `αᵀh / 2 − 1/2`.
    pub score: f64,
}

/// Uncentered Gram matrices plus their squares, reusable across pairings.
///
/// Only `L` is permuted, and `(ΠᵀLΠ)(ΠᵀLΠ)ᵀ = Πᵀ(LLᵀ)Π`, so `LLᵀ` is formed
/// once and gathered per permutation.
#[derive(Debug, Clone)]
pub struct LsmiGrams {
    k: DMatrix<f64>,
    l: DMatrix<f64>,
    kk: DMatrix<f64>,
    ll: DMatrix<f64>,
}

impl LsmiGrams {
    pub fn new(k: &KernelMatrix, l: &KernelMatrix) -> Result<Self> {
        ensure_same_len(k.len(), l.len())?;
        let k = k.matrix().clone();
        let l = l.matrix().clone();
        let kk = &k * k.transpose();
        let ll = &l * l.transpose();
        Ok(Self { k, l, kk, ll })
    }

    pub fn len(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.nrows() == 0
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `H_Π = ((KKᵀ) ∘ (ΠᵀLLᵀΠ)) / n² + ridge·I` and `h_Π = (K ∘ ΠᵀLΠ)1 / n`.
    pub fn system(
        &self,
        p: &Permutation,
        lambda: f64,
        placement: LambdaPlacement,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.len();
        ensure_same_len(n, p.len())?;
        let idx = p.as_slice();
        let scale = 1.0 / (n * n) as f64;
        let ridge = placement.ridge(lambda, n);
        let mut hm = DMatrix::from_fn(n, n, |a, b| self.kk[(a, b)] * self.ll[(idx[a], idx[b])] * scale);
        for a in 0..n {
            hm[(a, a)] += ridge;
        }
        let inv_n = 1.0 / n as f64;
        let hv = DVector::from_fn(n, |a, _| {
            let la = self.l.column(idx[a]);
            (0..n).map(|j| self.k[(a, j)] * la[idx[j]]).sum::<f64>() * inv_n
        });
        Ok((hm, hv))
    }

    pub fn fit(&self, p: &Permutation, lambda: f64, placement: LambdaPlacement) -> Result<LsmiFit> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        let (hm, hv) = self.system(p, lambda, placement)?;
        let solver = SpdSolver::new(&hm).ok_or_else(|| {
            if lambda == 0.0 {
                Error::Numerical("LSMI system H is singular with lambda = 0; use lambda > 0".into())
            } else {
                Error::Numerical(format!("LSMI system H is not positive definite (lambda = {lambda})"))
            }
        })?;
        let alpha = solver.solve_vec(&hv);
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("LSMI weights are not finite".into()));
        }
        let score = 0.5 * alpha.dot(&hv) - 0.5;
        Ok(LsmiFit {
            alpha,
            h: hv,
            lambda,
            score,
        })
    }

    /// `(1/2n) tr(ΠᵀLΠ · diag(α) · K) − 1/2`.
    pub fn trace_score(&self, p: &Permutation, alpha: &DVector<f64>) -> Result<f64> {
        let n = self.len();
        ensure_same_len(n, p.len())?;
        ensure_same_len(n, alpha.len())?;
        let weighted = DMatrix::from_fn(n, n, |a, j| alpha[a] * self.k[(a, j)]);
        // tr(L_p A K) = Σ_{j,a} L_p[j][a] α_a K[a][j]
        Ok(permuted_trace(&weighted, &self.l, p) / (2.0 * n as f64) - 0.5)
    }

    /// LAP profit for the next pairing: `profit[i][a] = Σ_c K[i][c] α_c L[p(c)][a]`,
    /// the transpose of `L Π diag(α) K` in the matching orientation.
    pub(crate) fn profit(&self, p: &Permutation, alpha: &DVector<f64>) -> DMatrix<f64> {
        let n = self.len();
        let weighted = DMatrix::from_fn(n, n, |i, c| self.k[(i, c)] * alpha[c]);
        let gathered = self.l.select_rows(p.as_slice());
        weighted * gathered
    }

    /// Same profit at a fractional linearization point `D` (`D[a][c]` is the
    /// weight of pairing `x_c` with `y_a`): `(L D diag(α) K)ᵀ`.
    pub(crate) fn profit_dense(&self, d: &DMatrix<f64>, alpha: &DVector<f64>) -> DMatrix<f64> {
        let n = self.len();
        let weighted = DMatrix::from_fn(n, n, |i, c| self.k[(i, c)] * alpha[c]);
        weighted * d.transpose() * &self.l
    }
}

/// LSMI fit with `λ` inside the `1/n²` scaling of `H`.
pub fn lsmi_fit(k: &KernelMatrix, l: &KernelMatrix, p: &Permutation, lambda: f64) -> Result<LsmiFit> {
    lsmi_fit_with(k, l, p, lambda, LambdaPlacement::Inside)
}

pub fn lsmi_fit_with(
    k: &KernelMatrix,
    l: &KernelMatrix,
    p: &Permutation,
    lambda: f64,
    placement: LambdaPlacement,
) -> Result<LsmiFit> {
    LsmiGrams::new(k, l)?.fit(p, lambda, placement)
}

/// Trace form of the LSMI score for given weights `α`.
pub fn lsmi_trace_score(
    k: &KernelMatrix,
    l: &KernelMatrix,
    p: &Permutation,
    alpha: &DVector<f64>,
) -> Result<f64> {
    ensure_same_len(k.len(), l.len())?;
    let n = k.len();
    ensure_same_len(n, p.len())?;
    ensure_same_len(n, alpha.len())?;
    let weighted = DMatrix::from_fn(n, n, |a, j| alpha[a] * k.matrix()[(a, j)]);
    Ok(permuted_trace(&weighted, l.matrix(), p) / (2.0 * n as f64) - 0.5)
}
