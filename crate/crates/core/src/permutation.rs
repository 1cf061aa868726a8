use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_len, Error, Result};

/// A bijection on `{0, .., n-1}` stored as an index array.
///
/// `p.get(i)` is the index in the second domain matched to object `i` of the
/// first domain, i.e. the pairs are `(x_i, y_{p(i)})`. The equivalent 0/1
/// matrix has a one at `(p(i), i)` and is never built.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for (i, &j) in map.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidPermutation(format!(
                    "entry {i} maps to {j}, outside 0..{n}"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidPermutation(format!(
                    "index {j} appears more than once"
                )));
            }
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Uniformly random permutation drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `(self ∘ q)(i) = self(q(i))`.
    pub fn compose(&self, q: &Permutation) -> Result<Permutation> {
        ensure_same_len(self.len(), q.len())?;
        Ok(Self(q.0.iter().map(|&j| self.0[j]).collect()))
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Fraction of indices on which `p` agrees with `truth`.
pub fn matched_accuracy(p: &Permutation, truth: &Permutation) -> Result<f64> {
    ensure_same_len(truth.len(), p.len())?;
    if p.is_empty() {
        return Err(Error::invalid("accuracy of an empty permutation"));
    }
    let hits = p.0.iter().zip(&truth.0).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / p.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn validates_bijection() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::new(vec![1, 0]).is_ok());
        assert!(serde_json::from_str::<Permutation>("[1,1,0]").is_err());
    }

    #[test]
    fn compose_examples() {
        let p = perm(&[1, 2, 0]);
        let q = perm(&[2, 0, 1]);
        assert_eq!(p.compose(&q).unwrap(), Permutation::identity(3));
        assert_eq!(Permutation::identity(3).compose(&p).unwrap(), p);
        assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(3));
        assert!(p.compose(&Permutation::identity(4)).is_err());
    }

    #[test]
    fn compose_matches_table() {
        // brute-force table over all of S_3: (p∘q)(i) = p[q[i]]
        let all = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for a in &all {
            for b in &all {
                let expected: Vec<usize> = (0..3).map(|i| a[b[i]]).collect();
                assert_eq!(perm(a).compose(&perm(b)).unwrap().as_slice(), &expected);
            }
        }
    }

    #[test]
    fn accuracy_examples() {
        let id = Permutation::identity(4);
        assert_eq!(matched_accuracy(&id, &id).unwrap(), 1.0);
        assert_eq!(matched_accuracy(&perm(&[1, 2, 3, 0]), &id).unwrap(), 0.0);
        let truth = Permutation::identity(320);
        let mut m: Vec<usize> = (0..320).collect();
        // derange the last 86 entries in a cycle, keep 234 fixed
        m[234..].rotate_left(1);
        let acc = matched_accuracy(&perm(&m), &truth).unwrap();
        assert!((acc - 0.731).abs() < 5e-4, "{acc}");
        assert!(matched_accuracy(&id, &Permutation::identity(3)).is_err());
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn compose_is_associative(
            (a, b, c) in (1usize..12).prop_flat_map(|n| (arb_perm(n), arb_perm(n), arb_perm(n)))
        ) {
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn inverse_round_trips(p in (1usize..20).prop_flat_map(arb_perm)) {
            prop_assert_eq!(p.inverse().inverse(), p.clone());
            prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
            prop_assert!(p.inverse().compose(&p).unwrap().is_identity());
        }
    }
}
