use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::graph::SplitTag;
use crate::nn::Split;
use crate::rng::{stream, Stream};

/// Where the train/val/test assignment comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// `masks.csv` when the dataset ships one, otherwise stratified.
    #[default]
    Auto,
    Provided,
    Stratified,
}

pub fn split_from_tags(tags: &[SplitTag]) -> Split {
    let pick = |want| {
        tags.iter()
            .enumerate()
            .filter(|(_, &t)| t == want)
            .map(|(i, _)| i)
            .collect()
    };
    Split {
        train: pick(SplitTag::Train),
        val: pick(SplitTag::Val),
        test: pick(SplitTag::Test),
    }
}

/// Seeded per-class 60/20/20 split: each class is shuffled and cut at
/// `round(0.6 n_c)` and `round(0.8 n_c)`.
pub fn stratified_split(labels: &[usize], seed: u64) -> Split {
    let mut rng = stream(seed, Stream::Split);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let a = (0.6 * n).round() as usize;
        let b = (0.8 * n).round() as usize;
        split.train.extend_from_slice(&idx[..a]);
        split.val.extend_from_slice(&idx[a..b]);
        split.test.extend_from_slice(&idx[b..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}
