//! Stratified k-fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub folds: usize,
    /// Fold of every sample.
    pub assignment: Vec<usize>,
    /// `per_class[c][f]`: samples of class `c` in fold `f`.
    pub per_class: Vec<Vec<usize>>,
    /// Classes whose size is not a multiple of the fold count.
    pub warnings: Vec<String>,
}

/// Shuffles the samples of each class with a generator seeded by `seed`
/// (classes visited in index order) and deals them round-robin over `k`
/// folds. The starting fold of each class continues where the previous
/// class stopped, so fold sizes differ by at most one even when class sizes
/// are not multiples of `k`.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::Config("fold count must be >= 1".into()));
    }
    if labels.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut per_class = vec![vec![0; k]; classes];
    let mut warnings = Vec::new();
    let mut next = 0;
    for (c, idx) in members.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() % k != 0 {
            let msg = format!(
                "class {c}: {} samples do not divide into {k} folds; using a near-equal split",
                idx.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assignment[i] = next;
            per_class[c][next] += 1;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan {
        folds: k,
        assignment,
        per_class,
        warnings,
    })
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}
