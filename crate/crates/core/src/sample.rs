use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// An ordered set of `n` feature vectors of dimension `d`, stored row-major.
///
/// Row order is significant: index `i` identifies object `i` of its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleSet {
    /// Builds a sample set from row-major data.
    ///
    /// A single sample is accepted so that trivial layouts can be expressed;
    /// every matching entry point requires at least two.
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "sample set needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::SizeMismatch {
                expected: n * d,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, n, d)
    }

    /// One-dimensional samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), values.len(), 1)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    /// New set whose row `k` is row `indices[k]` of `self`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::invalid(format!(
                    "row index {i} out of range for {} samples",
                    self.n
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, indices.len(), self.d)
    }

    /// Rows reordered so that row `i` of the result is row `p(i)` of `self`.
    ///
    /// With `self = y` this yields the y-side of the matched pairs
    /// `(x_i, y_{p(i)})`.
    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        crate::error::ensure_same_len(self.n, p.len())?;
        self.select(p.as_slice())
    }

    /// Every entry multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.data.iter().map(|v| v * alpha).collect(),
            self.n,
            self.d,
        )
    }

    /// Requires at least two samples, as every dependence estimate does.
    pub(crate) fn ensure_matchable(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
