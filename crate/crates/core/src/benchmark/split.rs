//! Train/test partitioning: seeded per-class stratified splits and
//! fold-based routing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::DatasetManifest;
use super::BenchmarkError;

/// Train count for a class of `n` samples: `frac·n` rounded half-up, kept
/// inside `[1, n-1]` so both sides receive at least one sample.
pub fn train_count(n: usize, train_frac: f64) -> usize {
    let k = (train_frac * n as f64 + 0.5 + 1e-9).floor() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// Per-class seeded shuffle; the first [`train_count`] of each class go to
/// train. Both outputs keep the input order.
pub fn split_stratified(
    m: &DatasetManifest,
    train_frac: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest), BenchmarkError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(BenchmarkError::Split(format!("train fraction {train_frac} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_train = vec![false; m.entries.len()];
    for class in 0..m.n_classes() {
        let mut idx: Vec<usize> = (0..m.entries.len()).filter(|&i| m.entries[i].label == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(BenchmarkError::Split(format!(
                "class `{}` has {} sample(s); at least 2 are needed",
                m.class_names[class],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..train_count(idx.len(), train_frac)] {
            is_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = m.entries.iter().cloned().zip(is_train).partition(|(_, t)| *t);
    Ok((
        m.with_entries(train.into_iter().map(|(e, _)| e).collect()),
        m.with_entries(test.into_iter().map(|(e, _)| e).collect()),
    ))
}

/// Routes entries by fold membership.
pub fn split_by_folds(
    m: &DatasetManifest,
    train_folds: &BTreeSet<u8>,
    test_folds: &BTreeSet<u8>,
) -> Result<(DatasetManifest, DatasetManifest), BenchmarkError> {
    if train_folds.is_empty() || test_folds.is_empty() {
        return Err(BenchmarkError::Split("train and test fold sets must be non-empty".into()));
    }
    if let Some(f) = train_folds.intersection(test_folds).next() {
        return Err(BenchmarkError::Split(format!("fold {f} is in both train and test sets")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for e in &m.entries {
        let fold = e.fold.ok_or_else(|| BenchmarkError::MissingFold(e.sample_id.clone()))?;
        if !(1..=10).contains(&fold) {
            return Err(BenchmarkError::InvalidFold {
                sample_id: e.sample_id.clone(),
                fold: fold as u32,
            });
        }
        if train_folds.contains(&fold) {
            train.push(e.clone());
        } else if test_folds.contains(&fold) {
            test.push(e.clone());
        } else {
            return Err(BenchmarkError::Split(format!(
                "sample `{}` is in fold {fold}, which is in neither set",
                e.sample_id
            )));
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(BenchmarkError::Split("split leaves an empty train or test set".into()));
    }
    Ok((m.with_entries(train), m.with_entries(test)))
}
