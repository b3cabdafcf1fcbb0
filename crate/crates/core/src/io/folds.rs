use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::label::Label;
use crate::error::{Error, Result};

pub const N_FOLDS: usize = 5;

/// Stratified assignment of recordings to cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    pub seed: u64,
    fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        N_FOLDS
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.fold_of.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Ids held out in `fold`, sorted.
    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.fold_of
            .iter()
            .filter(|&(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.fold_of.iter().map(|(id, &f)| (id.as_str(), f))
    }
}

/// Deals each class into [`N_FOLDS`] folds.
///
/// Within a class the ids are sorted, shuffled by a ChaCha8 generator seeded
/// with `seed`, then dealt round-robin. Each class continues dealing from the
/// fold where the previous class stopped, so overall fold sizes also stay
/// within one of each other.
pub fn make_folds<'a, I>(items: I, seed: u64) -> Result<FoldAssignment>
where
    I: IntoIterator<Item = (&'a str, Label)>,
{
    let mut by_class: BTreeMap<Label, Vec<&str>> = Label::ALL.iter().map(|&l| (l, Vec::new())).collect();
    let mut seen = HashSet::new();
    for (id, label) in items {
        if !seen.insert(id) {
            return Err(Error::InvalidRecord(format!("duplicate recording id {id:?}")));
        }
        by_class.get_mut(&label).unwrap().push(id);
    }
    for (label, ids) in &by_class {
        if ids.len() < N_FOLDS {
            return Err(Error::TooFewSamples {
                label: label.name(),
                count: ids.len(),
                need: N_FOLDS,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = BTreeMap::new();
    let mut next = 0;
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            fold_of.insert((*id).to_owned(), next);
            next = (next + 1) % N_FOLDS;
        }
    }
    Ok(FoldAssignment { seed, fold_of })
}
