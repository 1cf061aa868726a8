//! Dependence measures evaluated on permuted pairings `(x_i, y_{p(i)})`.
//!
//! Permutations are applied as index gathers; `Πᵀ L Π` is never formed by
//! matrix products.

mod cv;
mod lsmi;

pub(crate) use cv::{split_folds, Fold};
pub use cv::{lsmi_cv_select, CvSelection, LsmiCvSelector};
pub use lsmi::{lsmi_fit, lsmi_fit_with, lsmi_trace_score, LsmiFit, LsmiGrams};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ensure_same_len, Error, Result};
use crate::kernels::{center_matrix, CenteredKernelMatrix, KernelMatrix, NormalizedKernelMatrix};
use crate::linalg::{conjugate, permuted_trace};
use crate::permutation::Permutation;

/// `tr(K̄ Πᵀ L̄ Π)`.
pub fn hsic(kbar: &CenteredKernelMatrix, lbar: &CenteredKernelMatrix, p: &Permutation) -> Result<f64> {
    ensure_same_len(kbar.len(), lbar.len())?;
    ensure_same_len(kbar.len(), p.len())?;
    Ok(permuted_trace(kbar.matrix(), lbar.matrix(), p))
}

/// `tr(K̃ Πᵀ L̃ Π)`; both sides must share the same `ε`.
pub fn nocco_score(
    ktil: &NormalizedKernelMatrix,
    ltil: &NormalizedKernelMatrix,
    p: &Permutation,
) -> Result<f64> {
    if ktil.epsilon() != ltil.epsilon() {
        return Err(Error::invalid(format!(
            "normalized kernels built with different epsilon ({} vs {})",
            ktil.epsilon(),
            ltil.epsilon()
        )));
    }
    ensure_same_len(ktil.len(), ltil.len())?;
    ensure_same_len(ktil.len(), p.len())?;
    Ok(permuted_trace(ktil.matrix(), ltil.matrix(), p))
}

/// Pseudo log-determinant of `Γ(K ∘ ΠᵀLΠ)Γ`, the Gaussian-MI matching
/// objective (smaller is more dependent).
///
/// The centered matrix always has the null vector `1`, so only eigenvalues
/// above `1e-10 · λ_max` enter the sum.
pub fn ksmi_objective(k: &KernelMatrix, l: &KernelMatrix, p: &Permutation) -> Result<f64> {
    ensure_same_len(k.len(), l.len())?;
    ensure_same_len(k.len(), p.len())?;
    let lp = conjugate(l.matrix(), p);
    let joint: DMatrix<f64> = k.matrix().component_mul(&lp);
    let centered = center_matrix(&joint);
    let eig = SymmetricEigen::new(centered).eigenvalues;
    let max = eig.max();
    if !(max.is_finite() && max > f64::MIN_POSITIVE) {
        return Err(Error::ObjectiveUndefined(
            "centered joint Gram matrix is zero".into(),
        ));
    }
    let min = eig.min();
    if min < -1e-8 * max {
        return Err(Error::ObjectiveUndefined(format!(
            "centered joint Gram matrix has negative eigenvalue {min:e}"
        )));
    }
    let tau = 1e-10 * max;
    Ok(eig.iter().filter(|&&e| e > tau).map(|e| e.ln()).sum())
}
