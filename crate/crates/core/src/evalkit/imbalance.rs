use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: Vec<usize>,
    /// Largest over smallest count; `None` when some class is empty.
    pub imbalance_ratio: Option<f64>,
}

pub fn class_histogram(labels: &[usize], classes: usize) -> Result<ClassHistogram, EvalError> {
    let mut counts = vec![0; classes];
    for &l in labels {
        *counts.get_mut(l).ok_or(EvalError::IndexOutOfRange { index: l, classes })? += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    let imbalance_ratio = (min > 0).then(|| max as f64 / min as f64);
    Ok(ClassHistogram { counts, imbalance_ratio })
}

/// `w_c = N / (K · n_c)`.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>, EvalError> {
    if counts.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(EvalError::ZeroCount(c));
    }
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts.iter().map(|&c| n as f64 / (k * c as f64)).collect())
}

/// Indices into `labels` with every class brought up to the largest class count.
///
/// Each record appears once; smaller classes are topped up by drawing with
/// replacement from their own records. The result is shuffled.
pub fn oversample(labels: &[usize], seed: u64) -> Result<Vec<usize>, EvalError> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(EvalError::EmptyClass(c));
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut r = rng::sub_rng(seed, "oversample", 0);
    let mut out = Vec::with_capacity(target * classes);
    for m in &members {
        out.extend_from_slice(m);
        for _ in m.len()..target {
            out.push(m[r.random_range(0..m.len())]);
        }
    }
    out.shuffle(&mut r);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn histogram_ratio() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        assert_eq!(class_histogram(&labels, 4).unwrap().imbalance_ratio, Some(1.0));
        let mut l = vec![0; 100];
        l.extend(vec![1; 10]);
        assert_eq!(class_histogram(&l, 2).unwrap().imbalance_ratio, Some(10.0));
        assert_eq!(class_histogram(&l, 3).unwrap().imbalance_ratio, None);
    }

    #[test]
    fn weights_by_hand() {
        let w = class_weights(&[100, 50, 10]).unwrap();
        let want = [160.0 / 300.0, 160.0 / 150.0, 160.0 / 30.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(class_weights(&[7, 7, 7]).unwrap(), vec![1.0; 3]);
        assert!(matches!(class_weights(&[3, 0]), Err(EvalError::ZeroCount(1))));
    }

    #[test]
    fn oversample_examples() {
        let labels = [0, 0, 0, 1, 1, 1, 1, 1];
        let idx = oversample(&labels, 1).unwrap();
        assert_eq!(idx.len(), 10);
        assert_eq!(idx.iter().filter(|&&i| labels[i] == 0).count(), 5);
        assert_eq!(idx, oversample(&labels, 1).unwrap());

        let balanced = [0, 1, 2, 0, 1, 2];
        let mut p = oversample(&balanced, 4).unwrap();
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4, 5]);
    }

    proptest! {
        #[test]
        fn weights_identity(counts in proptest::collection::vec(1usize..10_000, 1..20)) {
            let w = class_weights(&counts).unwrap();
            let n: usize = counts.iter().sum();
            let s: f64 = w.iter().zip(&counts).map(|(w, &c)| w * c as f64).sum();
            prop_assert!((s - n as f64).abs() <= 1e-9 * n as f64);
        }

        #[test]
        fn oversample_balances(sizes in proptest::collection::vec(1usize..30, 1..6), seed in any::<u64>()) {
            let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let idx = oversample(&labels, seed).unwrap();
            let max = *sizes.iter().max().unwrap();
            prop_assert!(idx.iter().all(|&i| i < labels.len()));
            let h = class_histogram(&idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(), sizes.len()).unwrap();
            prop_assert!(h.counts.iter().all(|&c| c == max));
        }
    }
}
