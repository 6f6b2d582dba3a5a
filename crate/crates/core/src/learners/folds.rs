//! Balanced, seeded cross-validation fold assignment.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeds::{derive_rng, tag};

/// A partition of `0..n` into `k` folds of near-equal size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    /// `labels[i]` is the fold (in `0..k`) of observation `i`.
    pub labels: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    /// Indices of the validation set of `fold`.
    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == fold).collect()
    }

    /// Indices of the training set of `fold`.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] != fold).collect()
    }
}

/// Randomly partition `n` observations into `k` balanced folds.
///
/// Deterministic in `(n, k, seed)`; fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Precondition(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Precondition(format!("k = {k} exceeds n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_rng(seed, &[tag::FOLDS, n as u64, k as u64]);
    order.shuffle(&mut rng);
    let mut labels = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        labels[idx] = pos % k;
    }
    Ok(FoldAssignment { labels, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(f: &FoldAssignment) -> Vec<usize> {
        let mut s = vec![0usize; f.k];
        for &l in &f.labels {
            s[l] += 1;
        }
        s
    }

    #[test]
    fn leave_one_out_balance() {
        let f = make_folds(10, 10, 1).unwrap();
        assert!(sizes(&f).iter().all(|&s| s == 1));
    }

    #[test]
    fn unbalanced_sizes_differ_by_one() {
        let f = make_folds(103, 10, 7).unwrap();
        let mut s = sizes(&f);
        s.sort_unstable();
        assert_eq!(&s[..7], &[10; 7]);
        assert_eq!(&s[7..], &[11; 3]);
    }

    #[test]
    fn deterministic() {
        let a = make_folds(50, 5, 42).unwrap();
        let b = make_folds(50, 5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_greater_than_n_errors() {
        assert!(make_folds(3, 5, 1).is_err());
    }
}
