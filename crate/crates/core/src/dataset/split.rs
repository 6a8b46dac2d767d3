use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TEST_FRACTION: f64 = 0.2;
pub const VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Scene-level partition. Every illuminant variant of a scene lands in the
/// same part, so no scene content leaks between training and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn scenes(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_of(&self, scene_id: &str) -> Option<Split> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|&s| self.scenes(s).iter().any(|id| id == scene_id))
    }

    /// Parts are pairwise disjoint and free of duplicates.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(Error::Config(format!(
                    "scene {id:?} appears in more than one split slot"
                )));
            }
        }
        Ok(())
    }
}

/// Shuffle the scene ids with `seed`, take `round(0.2·N)` for test, then
/// `round(0.2·(N − n_test))` of the remainder for validation; the rest trains.
pub fn make_splits(scene_ids: &[String], seed: u64) -> Result<SplitManifest> {
    let unique: BTreeSet<&String> = scene_ids.iter().collect();
    if unique.len() != scene_ids.len() {
        return Err(Error::InvalidArgument("scene ids must be unique".into()));
    }
    let n = scene_ids.len();
    let n_test = (TEST_FRACTION * n as f64).round() as usize;
    let n_val = (VAL_FRACTION * (n - n_test) as f64).round() as usize;
    let mut order: Vec<String> = scene_ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut val = order[n_test..n_test + n_val].to_vec();
    let mut train = order[n_test + n_val..].to_vec();
    test.sort();
    val.sort();
    train.sort();
    Ok(SplitManifest { seed, train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:04}")).collect()
    }

    #[test]
    fn sizes_follow_rounding_rule() {
        let s = make_splits(&ids(1144), 0).unwrap();
        assert_eq!((s.test.len(), s.val.len(), s.train.len()), (229, 183, 732));
        let s = make_splits(&ids(24), 0).unwrap();
        assert_eq!((s.test.len(), s.val.len(), s.train.len()), (5, 4, 15));
        let s = make_splits(&ids(10), 0).unwrap();
        assert_eq!((s.test.len(), s.val.len(), s.train.len()), (2, 2, 6));
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = make_splits(&ids(50), 3).unwrap();
        assert_eq!(a, make_splits(&ids(50), 3).unwrap());
        assert_ne!(a, make_splits(&ids(50), 4).unwrap());
        a.validate().unwrap();
        assert_eq!(a.split_of(&a.val[0]), Some(Split::Val));
        assert_eq!(a.split_of("missing"), None);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(make_splits(&["a".into(), "a".into()], 0).is_err());
    }
}
