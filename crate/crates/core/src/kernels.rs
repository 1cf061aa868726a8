//! Gaussian Gram matrices, double centering, NOCCO normalization and the
//! median-distance width heuristic.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sample::{sq_dist, SampleSet};

/// Gram matrix `K[i][j] = k(s_i, s_j)` of a Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(DMatrix<f64>);

/// `ΓKΓ` with `Γ = I − (1/n)11ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernelMatrix(DMatrix<f64>);

/// `K̄(K̄ + nεI)⁻¹` for a centered Gram `K̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedKernelMatrix {
    gram: DMatrix<f64>,
    epsilon: f64,
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "kernel matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel matrix has non-finite entries"));
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl KernelMatrix {
    /// Wraps an arbitrary square symmetric matrix, e.g. a precomputed Gram.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let tol = 1e-12 * m.amax().max(1.0);
        if (&m - m.transpose()).amax() > tol {
            return Err(Error::invalid("kernel matrix is not symmetric"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

impl CenteredKernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

impl NormalizedKernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.nrows() == 0
    }
}

fn check_sigma(sigma: f64) -> Result<f64> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(1.0 / (2.0 * sigma * sigma))
    } else {
        Err(Error::invalid(format!("kernel width must be > 0, got {sigma}")))
    }
}

/// Gaussian Gram matrix `exp(−‖s_i − s_j‖² / 2σ²)`.
pub fn gaussian_gram(s: &SampleSet, sigma: f64) -> Result<KernelMatrix> {
    let gamma = check_sigma(sigma)?;
    let n = s.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    // column-major storage; column j is also row j by symmetry
    par::for_each_chunk_mut(m.as_mut_slice(), n, |j, col| {
        let xj = s.row(j);
        for (i, v) in col.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else {
                (-gamma * sq_dist(s.row(i), xj)).exp()
            };
        }
    });
    Ok(KernelMatrix(m))
}

/// Rectangular Gaussian kernel matrix `G[i][j] = k(a_i, b_j)`.
pub fn gaussian_cross_gram(a: &SampleSet, b: &SampleSet, sigma: f64) -> Result<DMatrix<f64>> {
    let gamma = check_sigma(sigma)?;
    if a.dim() != b.dim() {
        return Err(Error::SizeMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.len(), b.len());
    let mut m = DMatrix::<f64>::zeros(na, nb);
    par::for_each_chunk_mut(m.as_mut_slice(), na, |j, col| {
        let bj = b.row(j);
        for (i, v) in col.iter_mut().enumerate() {
            *v = (-gamma * sq_dist(a.row(i), bj)).exp();
        }
    });
    Ok(m)
}

/// Double centering `ΓKΓ`, evaluated as `K_ij − r_i − c_j + g`.
pub fn center(k: &KernelMatrix) -> CenteredKernelMatrix {
    CenteredKernelMatrix(center_matrix(&k.0))
}

pub(crate) fn center_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    if n == 0 {
        return k.clone();
    }
    let inv_n = 1.0 / n as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() * inv_n).collect();
    let col_means: Vec<f64> = k.column_iter().map(|c| c.sum() * inv_n).collect();
    let grand = row_means.iter().sum::<f64>() * inv_n;
    let mut out = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand);
    symmetrize(&mut out);
    out
}

/// `K̃ = K̄(K̄ + nεI)⁻¹`, via a Cholesky solve of the positive definite
/// `K̄ + nεI`. Both factors share eigenvectors, so the product is symmetric.
pub fn nocco_normalize(kbar: &CenteredKernelMatrix, epsilon: f64) -> Result<NormalizedKernelMatrix> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let n = kbar.len();
    let mut a = kbar.0.clone();
    for i in 0..n {
        a[(i, i)] += n as f64 * epsilon;
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Numerical("K̄ + nεI is not positive definite; is the Gram matrix PSD?".into())
    })?;
    let mut gram = chol.solve(&kbar.0);
    symmetrize(&mut gram);
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("normalized kernel has non-finite entries".into()));
    }
    Ok(NormalizedKernelMatrix { gram, epsilon })
}

/// Which pairwise distances enter the median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianPairs {
    /// All `n²` ordered pairs, including the `n` zero self-distances.
    #[default]
    AllOrdered,
    /// Only pairs with `i ≠ j`.
    Distinct,
}

/// `2^{-1/2} · median{‖s_i − s_j‖}` over all ordered pairs.
pub fn median_width(s: &SampleSet) -> Result<f64> {
    median_width_with(s, MedianPairs::AllOrdered)
}

pub fn median_width_with(s: &SampleSet, pairs: MedianPairs) -> Result<f64> {
    let n = s.len();
    if n < 2 {
        return Err(Error::invalid("median width needs at least 2 samples"));
    }
    // Upper-triangle distances; every one of them occurs twice among ordered
    // pairs, and the diagonal contributes n zeros.
    let mut upper: Vec<f64> = par::map_range(n, |i| {
        ((i + 1)..n)
            .map(|j| s.sq_dist(i, j).sqrt())
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    upper.sort_unstable_by(f64::total_cmp);

    let zeros = match pairs {
        MedianPairs::AllOrdered => n,
        MedianPairs::Distinct => 0,
    };
    let total = zeros + 2 * upper.len();
    // k-th smallest element of the full multiset
    let kth = |k: usize| if k < zeros { 0.0 } else { upper[(k - zeros) / 2] };
    let median = if total % 2 == 1 {
        kth(total / 2)
    } else {
        0.5 * (kth(total / 2 - 1) + kth(total / 2))
    };
    if median <= 0.0 {
        return Err(Error::DegenerateWidth);
    }
    Ok(median * std::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, d: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::new((0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(), n, d).unwrap()
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose()
    }

    fn gamma(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
    }

    #[test]
    fn gram_examples() {
        let s = SampleSet::from_scalars(&[0.0, 1.0, 0.0]).unwrap();
        let k = gaussian_gram(&s, 1.0).unwrap();
        assert_relative_eq!(k.matrix()[(0, 1)], (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(k.matrix()[(0, 1)], 0.6065306597126334, epsilon = 1e-15);
        assert_eq!(k.matrix()[(0, 2)], 1.0);
        assert!(k.matrix().diagonal().iter().all(|&v| v == 1.0));
        let wide = gaussian_gram(&s, 1e8).unwrap();
        assert!(wide.matrix().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(gaussian_gram(&s, 0.0).is_err());
        assert!(gaussian_gram(&s, -1.0).is_err());
    }

    #[test]
    fn gram_is_psd_and_symmetric() {
        for seed in 0..5 {
            let s = random_samples(12, 3, seed);
            let k = gaussian_gram(&s, 0.7).unwrap();
            assert_eq!(k.matrix(), &k.matrix().transpose());
            let eig = SymmetricEigen::new(k.matrix().clone());
            assert!(eig.eigenvalues.min() >= -1e-9);
        }
    }

    #[test]
    fn gram_commutes_with_reordering() {
        let s = random_samples(9, 2, 3);
        let p = crate::Permutation::new(vec![3, 1, 4, 0, 8, 7, 2, 6, 5]).unwrap();
        let k = gaussian_gram(&s, 0.9).unwrap();
        let kp = gaussian_gram(&s.permuted(&p).unwrap(), 0.9).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(kp.matrix()[(i, j)], k.matrix()[(p.get(i), p.get(j))]);
            }
        }
    }

    #[test]
    fn center_examples() {
        let ones = KernelMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        assert!(center(&ones).matrix().amax() < 1e-15);

        let psd = random_psd(3, 7);
        let kbar = center(&KernelMatrix::from_matrix(psd.clone()).unwrap());
        let g = gamma(3);
        let oracle = &g * &psd * &g;
        assert!((kbar.matrix() - oracle).amax() < 1e-12);

        let again = center(&KernelMatrix::from_matrix(kbar.matrix().clone()).unwrap());
        assert!((again.matrix() - kbar.matrix()).amax() < 1e-12);
    }

    #[test]
    fn centered_rows_and_columns_sum_to_zero() {
        let s = random_samples(30, 2, 11);
        let kbar = center(&gaussian_gram(&s, 0.5).unwrap());
        let tol = 1e-9 * 30.0;
        assert!(kbar.matrix().row_iter().all(|r| r.sum().abs() < tol));
        assert!(kbar.matrix().column_iter().all(|c| c.sum().abs() < tol));
    }

    fn spectral_oracle(kbar: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
        let n = kbar.nrows();
        let eig = SymmetricEigen::new(kbar.clone());
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let mu = eig.eigenvalues[k];
            let u = eig.eigenvectors.column(k);
            out += (mu / (mu + n as f64 * epsilon)) * u * u.transpose();
        }
        out
    }

    #[test]
    fn nocco_examples() {
        let zero = center(&KernelMatrix::from_matrix(DMatrix::from_element(5, 5, 1.0)).unwrap());
        assert!(nocco_normalize(&zero, 0.1).unwrap().matrix().amax() < 1e-15);

        // rank-deficient: centered identity has eigenvalues {1, 1, 0}
        let id = center(&KernelMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap());
        let ktil = nocco_normalize(&id, 0.05).unwrap();
        let oracle = spectral_oracle(id.matrix(), 0.05);
        assert!((ktil.matrix() - oracle).amax() < 1e-12);

        let s = random_samples(6, 2, 1);
        let kbar = center(&gaussian_gram(&s, 1.0).unwrap());
        assert!(nocco_normalize(&kbar, 1e12).unwrap().matrix().amax() < 1e-10);
        assert!(nocco_normalize(&kbar, 0.0).is_err());
    }

    #[test]
    fn nocco_residual_and_spectrum() {
        for seed in 0..10 {
            let n = 8 + seed as usize;
            let kbar = center(&KernelMatrix::from_matrix(random_psd(n, seed)).unwrap());
            let eps = 0.01 * (1 + seed) as f64;
            let ktil = nocco_normalize(&kbar, eps).unwrap();
            let mut a = kbar.matrix().clone();
            for i in 0..n {
                a[(i, i)] += n as f64 * eps;
            }
            let resid = (ktil.matrix() * &a - kbar.matrix()).amax();
            assert!(resid <= 1e-8 * n as f64, "residual {resid}");
            let oracle = spectral_oracle(kbar.matrix(), eps);
            assert!((ktil.matrix() - &oracle).amax() < 1e-8);
            let eig = SymmetricEigen::new(ktil.matrix().clone()).eigenvalues;
            assert!(eig.min() > -1e-10 && eig.max() < 1.0);
        }
    }

    #[test]
    fn median_examples() {
        let s = SampleSet::from_scalars(&[0.0, 2.0]).unwrap();
        assert_relative_eq!(median_width(&s).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        // distinct pairs only: {2, 2} → 2/√2
        assert_relative_eq!(
            median_width_with(&s, MedianPairs::Distinct).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
        let same = SampleSet::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(median_width(&same), Err(Error::DegenerateWidth)));
    }

    #[test]
    fn median_matches_full_enumeration() {
        for seed in 0..6 {
            let n = 3 + seed as usize;
            let s = random_samples(n, 2, seed);
            let mut all = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    all.push(s.sq_dist(i, j).sqrt());
                }
            }
            all.sort_by(f64::total_cmp);
            let m = all.len();
            let med = if m % 2 == 1 { all[m / 2] } else { 0.5 * (all[m / 2 - 1] + all[m / 2]) };
            assert_relative_eq!(median_width(&s).unwrap(), med / 2f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn median_is_homogeneous() {
        let s = random_samples(15, 3, 2);
        let w = median_width(&s).unwrap();
        for alpha in [0.1, 3.0, 250.0] {
            assert_relative_eq!(median_width(&s.scaled(alpha).unwrap()).unwrap(), alpha * w, max_relative = 1e-12);
        }
    }
}
