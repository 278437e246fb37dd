use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use super::EvalError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<(), EvalError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::Ratios(format!("{r:?} must be non-negative and sum to 1")));
        }
        Ok(())
    }

    /// `[train, val, test]` sizes for a class of `n`: floors, then the remainder to
    /// train, val and test in turn.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let floor = |r: f64| (r * n as f64 + 1e-9).floor() as usize;
        let mut s = [floor(self.train), floor(self.val), floor(self.test)];
        let mut rest = n - s.iter().sum::<usize>();
        let mut k = 0;
        while rest > 0 {
            s[k % 3] += 1;
            rest -= 1;
            k += 1;
        }
        s
    }
}

/// Per-record split tags plus per-class `[train, val, test]` counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub tags: Vec<Split>,
    pub counts: Vec<[usize; 3]>,
}

impl SplitAssignment {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.tags.iter().enumerate().filter(|(_, &t)| t == split).map(|(i, _)| i).collect()
    }

    fn from_tags(tags: Vec<Split>, labels: &[usize], classes: usize, seed: u64) -> Self {
        let mut counts = vec![[0; 3]; classes];
        for (t, &l) in tags.iter().zip(labels) {
            counts[l][t.index()] += 1;
        }
        Self { seed, tags, counts }
    }
}

/// Stratified split of `labels` over classes `0..classes`, each of which must be non-empty.
pub fn stratified_split_labels(labels: &[usize], classes: usize, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment, EvalError> {
    ratios.validate()?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(EvalError::IndexOutOfRange { index: l, classes });
        }
        members[l].push(i);
    }
    let mut tags = vec![Split::Train; labels.len()];
    for (c, idx) in members.iter_mut().enumerate() {
        if idx.is_empty() {
            return Err(EvalError::EmptyClass(c));
        }
        idx.shuffle(&mut rng::sub_rng(seed, "split", c as u64));
        let [tr, va, _] = ratios.sizes(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            tags[i] = if k < tr {
                Split::Train
            } else if k < tr + va {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    Ok(SplitAssignment::from_tags(tags, labels, classes, seed))
}

/// Splits a manifest. Fixed tags are kept verbatim when every record has one;
/// otherwise the classes present are split stratified and absent classes get zero counts.
pub fn stratified_split(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment, EvalError> {
    let labels = manifest.labels();
    let classes = manifest.class_count();
    let tagged = manifest.records.iter().filter(|r| r.split.is_some()).count();
    if tagged == labels.len() && tagged > 0 {
        let tags = manifest.records.iter().map(|r| r.split.expect("all tagged")).collect();
        return Ok(SplitAssignment::from_tags(tags, &labels, classes, seed));
    }
    if tagged > 0 {
        return Err(EvalError::MixedSplitTags);
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut present: Vec<usize> = labels.clone();
    present.sort_unstable();
    present.dedup();
    let dense: Vec<usize> = labels.iter().map(|l| present.binary_search(l).expect("present")).collect();
    let inner = stratified_split_labels(&dense, present.len(), ratios, seed)?;
    Ok(SplitAssignment::from_tags(inner.tags, &labels, classes, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels_for(sizes: &[usize]) -> Vec<usize> {
        sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
    }

    #[test]
    fn worked_sizes() {
        let r = SplitRatios::default();
        assert_eq!(r.sizes(10), [6, 2, 2]);
        assert_eq!(r.sizes(7), [5, 1, 1]);
        assert_eq!(r.sizes(5), [3, 1, 1]);
        assert_eq!(r.sizes(1), [1, 0, 0]);
        assert_eq!(r.sizes(4), [3, 1, 0]);
    }

    #[test]
    fn split_counts_follow_sizes() {
        let labels = labels_for(&[10, 7, 5, 1]);
        let a = stratified_split_labels(&labels, 4, SplitRatios::default(), 3).unwrap();
        assert_eq!(a.counts, vec![[6, 2, 2], [5, 1, 1], [3, 1, 1], [1, 0, 0]]);
        assert_eq!(a, stratified_split_labels(&labels, 4, SplitRatios::default(), 3).unwrap());
    }

    #[test]
    fn empty_class_is_an_error() {
        assert!(matches!(stratified_split_labels(&[0, 0, 2], 3, SplitRatios::default(), 0), Err(EvalError::EmptyClass(1))));
    }

    proptest! {
        #[test]
        fn partition_and_stratification(sizes in proptest::collection::vec(1usize..40, 1..8), seed in any::<u64>(), other in any::<u64>()) {
            let labels = labels_for(&sizes);
            let a = stratified_split_labels(&labels, sizes.len(), SplitRatios::default(), seed).unwrap();
            prop_assert_eq!(a.tags.len(), labels.len());
            for (c, &n) in sizes.iter().enumerate() {
                prop_assert_eq!(a.counts[c], SplitRatios::default().sizes(n));
                prop_assert_eq!(a.counts[c].iter().sum::<usize>(), n);
            }
            let b = stratified_split_labels(&labels, sizes.len(), SplitRatios::default(), other).unwrap();
            prop_assert_eq!(&a.counts, &b.counts);
        }
    }
}
