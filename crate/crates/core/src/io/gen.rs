//! Seeded synthetic data. Every generator is a pure function of its
//! arguments.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::sample::SampleSet;

/// Two unpaired sets with the hidden pairing: `x_i` belongs with
/// `y_{truth(i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPair {
    pub x: SampleSet,
    pub y: SampleSet,
    pub truth: Permutation,
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Places `paired[i]` at position `truth(i)`.
fn scatter(paired: &[Vec<f64>], truth: &Permutation) -> Result<SampleSet> {
    let mut rows = vec![Vec::new(); paired.len()];
    for (i, row) in paired.iter().enumerate() {
        rows[truth.get(i)] = row.clone();
    }
    SampleSet::from_rows(&rows)
}

/// `x ~ U(−1, 1)`, `y = x³`, with `y` stored in shuffled order.
pub fn gen_cubic(n: usize, seed: u64) -> Result<GeneratedPair> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let truth = Permutation::random(n, &mut rng);
    let paired: Vec<Vec<f64>> = xs.iter().map(|v| vec![v * v * v]).collect();
    Ok(GeneratedPair {
        x: SampleSet::from_scalars(&xs)?,
        y: scatter(&paired, &truth)?,
        truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// `y` is the right half of the vector.
    #[default]
    Halves,
    /// `y` is the left half reversed, so both sides carry the same content.
    Mirror,
}

/// Number of cosine and sine terms in each smooth vector.
const SMOOTH_TERMS: usize = 4;

/// Draws `n` smooth random vectors of length `d`, splits each into a left
/// half `x` and a right half `y`, adds `N(0, noise²)` to `y` and shuffles it.
pub fn gen_split_halves(n: usize, d: usize, noise: f64, seed: u64, mode: SplitMode) -> Result<GeneratedPair> {
    check_n(n)?;
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::invalid(format!("dimension must be even and >= 2, got {d}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = d / 2;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let coef: Vec<(f64, f64)> = (0..SMOOTH_TERMS)
            .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let v: Vec<f64> = (0..d)
            .map(|t| {
                let u = t as f64 / (d - 1) as f64;
                coef.iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let w = PI * k as f64 * u;
                        (a * w.cos() + b * w.sin()) / (1 + k) as f64
                    })
                    .sum()
            })
            .collect();
        let left = v[..half].to_vec();
        let mut right = match mode {
            SplitMode::Halves => v[half..].to_vec(),
            SplitMode::Mirror => left.iter().rev().copied().collect(),
        };
        for r in &mut right {
            *r += noise * rng.sample::<f64, _>(StandardNormal);
        }
        xs.push(left);
        ys.push(right);
    }
    let truth = Permutation::random(n, &mut rng);
    Ok(GeneratedPair {
        x: SampleSet::from_rows(&xs)?,
        y: scatter(&ys, &truth)?,
        truth,
    })
}

/// Lab color vectors drawn around `k` random cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorClusters {
    pub features: SampleSet,
    pub labels: Vec<usize>,
}

/// `n` points in Lab space, assigned to `k` clusters round-robin; each is its
/// cluster center plus isotropic Gaussian noise of standard deviation
/// `spread`.
pub fn gen_color_clusters(n: usize, k: usize, spread: f64, seed: u64) -> Result<ColorClusters> {
    check_n(n)?;
    if k < 1 || k > n {
        return Err(Error::invalid(format!("cluster count must lie in 1..={n}, got {k}")));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<[f64; 3]> = (0..k)
        .map(|_| {
            [
                rng.random_range(20.0..90.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
            ]
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        rows.push(
            centers[c]
                .iter()
                .map(|m| m + spread * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>(),
        );
        labels.push(c);
    }
    Ok(ColorClusters {
        features: SampleSet::from_rows(&rows)?,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{center, gaussian_gram, median_width};
    use crate::linalg::permuted_trace;

    #[test]
    fn cubic_pairs_lie_on_curve() {
        let g = gen_cubic(100, 3).unwrap();
        for i in 0..100 {
            let x = g.x.row(i)[0];
            assert!((-1.0..1.0).contains(&x));
            assert_eq!(g.y.row(g.truth.get(i))[0], x * x * x);
        }
        assert_eq!(gen_cubic(100, 3).unwrap(), g);
        assert_ne!(gen_cubic(100, 4).unwrap().truth, g.truth);
        assert!(gen_cubic(1, 0).is_err());
    }

    #[test]
    fn split_halves_shapes_and_errors() {
        let g = gen_split_halves(10, 8, 0.1, 1, SplitMode::Halves).unwrap();
        assert_eq!((g.x.len(), g.x.dim(), g.y.dim()), (10, 4, 4));
        assert_eq!(g, gen_split_halves(10, 8, 0.1, 1, SplitMode::Halves).unwrap());
        assert!(gen_split_halves(10, 7, 0.1, 1, SplitMode::Halves).is_err());
        assert!(gen_split_halves(10, 8, -1.0, 1, SplitMode::Halves).is_err());

        let m = gen_split_halves(10, 8, 0.0, 2, SplitMode::Mirror).unwrap();
        for i in 0..10 {
            let rev: Vec<f64> = m.x.row(i).iter().rev().copied().collect();
            assert_eq!(m.y.row(m.truth.get(i)), rev.as_slice());
        }
    }

    #[test]
    fn noiseless_mirror_truth_is_brute_force_optimum() {
        for seed in 0..5 {
            let g = gen_split_halves(5, 6, 0.0, seed, SplitMode::Mirror).unwrap();
            let kbar = center(&gaussian_gram(&g.x, median_width(&g.x).unwrap()).unwrap());
            let lbar = center(&gaussian_gram(&g.y, median_width(&g.y).unwrap()).unwrap());
            let mut best = (f64::MIN, Vec::new());
            let mut idx = vec![0, 1, 2, 3, 4];
            permute_all(&mut idx, 0, &mut |p| {
                let v = permuted_trace(kbar.matrix(), lbar.matrix(), &Permutation::new(p.to_vec()).unwrap());
                if v > best.0 + 1e-12 {
                    best = (v, p.to_vec());
                }
            });
            assert_eq!(best.1, g.truth.as_slice());
        }
    }

    fn permute_all(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for j in k..v.len() {
            v.swap(k, j);
            permute_all(v, k + 1, f);
            v.swap(k, j);
        }
    }

    #[test]
    fn color_clusters_are_seeded() {
        let c = gen_color_clusters(30, 4, 2.0, 9).unwrap();
        assert_eq!(c.features.dim(), 3);
        assert_eq!(c.labels[5], 1);
        assert_eq!(c, gen_color_clusters(30, 4, 2.0, 9).unwrap());
        assert!(gen_color_clusters(30, 0, 2.0, 9).is_err());
    }
}
