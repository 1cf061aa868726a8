//! Multi-output Gaussian-kernel ridge regression.
//!
//! The fitted map is `x ↦ Wᵀ k(x)` with `k(x)_j = exp(−‖x − c_j‖² / 2τ²)`
//! over the training centers `c_j`. Training minimizes
//! `‖Y − G W‖²_F + (δ/2) ‖W‖²_F`, whose stationarity condition is
//! `(G G + (δ/2) I) W = G Y` for the symmetric Gram `G`.

use nalgebra::DMatrix;

use crate::dependence::{split_folds, Fold};
use crate::error::{ensure_same_len, Error, Result};
use crate::kernels::{gaussian_cross_gram, gaussian_gram};
use crate::linalg::SpdSolver;
use crate::par;
use crate::sample::SampleSet;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegressor {
    centers: SampleSet,
    /// `n × d_y`
    weights: DMatrix<f64>,
    tau: f64,
    delta: f64,
}

/// Result of a grid search: the refit model and the mean held-out error of
/// every candidate, indexed `tau_index * deltas.len() + delta_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCv {
    pub model: KernelRegressor,
    pub tau_index: usize,
    pub delta_index: usize,
    pub errors: Vec<f64>,
}

fn check_hyper(tau: f64, delta: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("kernel width tau must be > 0, got {tau}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(format!("ridge delta must be >= 0, got {delta}")));
    }
    Ok(())
}

fn solve_weights(g: &DMatrix<f64>, y: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let w = if delta == 0.0 {
        // G invertible reduces the normal equations to G W = Y
        let lu = g.clone().lu();
        let mut w = lu
            .solve(y)
            .ok_or_else(|| Error::Numerical("kernel Gram is singular with delta = 0; use delta > 0".into()))?;
        let r = y - g * &w;
        if let Some(dw) = lu.solve(&r) {
            w += dw;
        }
        w
    } else {
        let mut a = g * g;
        for i in 0..a.nrows() {
            a[(i, i)] += 0.5 * delta;
        }
        let solver = SpdSolver::new(&a)
            .ok_or_else(|| Error::Numerical(format!("ridge system is not positive definite (delta = {delta})")))?;
        let rhs = g * y;
        let cols: Vec<_> = (0..rhs.ncols()).map(|j| solver.solve_vec(&rhs.column(j).into_owned())).collect();
        DMatrix::from_columns(&cols)
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("regression weights are not finite".into()));
    }
    Ok(w)
}

impl KernelRegressor {
    /// Closed-form fit on matched pairs `(xm_i, ym_i)`.
    pub fn fit(xm: &SampleSet, ym: &SampleSet, tau: f64, delta: f64) -> Result<Self> {
        ensure_same_len(xm.len(), ym.len())?;
        check_hyper(tau, delta)?;
        let g = gaussian_gram(xm, tau)?.into_matrix();
        let weights = solve_weights(&g, &ym.to_matrix(), delta)?;
        Ok(Self {
            centers: xm.clone(),
            weights,
            tau,
            delta,
        })
    }

    /// Assembles a model from stored parts.
    pub fn from_parts(centers: SampleSet, weights: DMatrix<f64>, tau: f64, delta: f64) -> Result<Self> {
        check_hyper(tau, delta)?;
        ensure_same_len(centers.len(), weights.nrows())?;
        if weights.ncols() == 0 || weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weights must be finite with at least one output"));
        }
        Ok(Self {
            centers,
            weights,
            tau,
            delta,
        })
    }

    pub fn centers(&self) -> &SampleSet {
        &self.centers
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x_new: &SampleSet) -> Result<SampleSet> {
        ensure_same_len(self.centers.dim(), x_new.dim())?;
        let k = gaussian_cross_gram(x_new, &self.centers, self.tau)?;
        let out = k * &self.weights;
        SampleSet::new(out.transpose().as_slice().to_vec(), x_new.len(), self.output_dim())
    }

    /// `‖Y − G W‖²_F + (δ/2)‖W‖²_F` on the training data `y`.
    pub fn objective(&self, y: &SampleSet) -> Result<f64> {
        objective(&self.centers, y, &self.weights, self.tau, self.delta)
    }

    /// Grid search over `(τ, δ)` by k-fold mean held-out squared error,
    /// followed by a refit on all pairs. Ties keep the first candidate in
    /// `taus`-major order.
    pub fn fit_cv(
        xm: &SampleSet,
        ym: &SampleSet,
        taus: &[f64],
        deltas: &[f64],
        folds: usize,
        seed: u64,
    ) -> Result<RegressionCv> {
        ensure_same_len(xm.len(), ym.len())?;
        if taus.is_empty() || deltas.is_empty() {
            return Err(Error::invalid("regression grid is empty"));
        }
        for &t in taus {
            for &d in deltas {
                check_hyper(t, d)?;
            }
        }
        if folds < 2 || xm.len() < 2 * folds {
            return Err(Error::invalid(format!(
                "{folds}-fold CV needs folds >= 2 and at least {} pairs, got {}",
                2 * folds.max(2),
                xm.len()
            )));
        }
        let splits = split_folds(xm.len(), folds, seed);
        let errors: Vec<f64> = par::map_range(taus.len() * deltas.len(), |c| {
            held_out_error(xm, ym, &splits, taus[c / deltas.len()], deltas[c % deltas.len()])
        });
        let mut best = 0;
        for (c, e) in errors.iter().enumerate() {
            if *e < errors[best] {
                best = c;
            }
        }
        if !errors[best].is_finite() {
            return Err(Error::Numerical("no regression candidate could be fitted".into()));
        }
        let (ti, di) = (best / deltas.len(), best % deltas.len());
        Ok(RegressionCv {
            model: Self::fit(xm, ym, taus[ti], deltas[di])?,
            tau_index: ti,
            delta_index: di,
            errors,
        })
    }
}

/// Mean over folds of the mean held-out `‖y − ŷ‖²`; `+∞` if any fold fails.
fn held_out_error(xm: &SampleSet, ym: &SampleSet, splits: &[Fold], tau: f64, delta: f64) -> f64 {
    let mut total = 0.0;
    for fold in splits {
        let fit = (|| {
            let (xt, yt) = (xm.select(&fold.train)?, ym.select(&fold.train)?);
            let (xe, ye) = (xm.select(&fold.test)?, ym.select(&fold.test)?);
            let pred = KernelRegressor::fit(&xt, &yt, tau, delta)?.predict(&xe)?;
            let sse: f64 = pred.as_slice().iter().zip(ye.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
            Ok::<f64, Error>(sse / xe.len() as f64)
        })();
        match fit {
            Ok(e) if e.is_finite() => total += e,
            _ => return f64::INFINITY,
        }
    }
    total / splits.len() as f64
}

/// The training objective at arbitrary weights.
pub fn objective(xm: &SampleSet, ym: &SampleSet, w: &DMatrix<f64>, tau: f64, delta: f64) -> Result<f64> {
    ensure_same_len(xm.len(), ym.len())?;
    ensure_same_len(xm.len(), w.nrows())?;
    ensure_same_len(ym.dim(), w.ncols())?;
    let g = gaussian_gram(xm, tau)?.into_matrix();
    let r = ym.to_matrix() - g * w;
    Ok(r.norm_squared() + 0.5 * delta * w.norm_squared())
}
