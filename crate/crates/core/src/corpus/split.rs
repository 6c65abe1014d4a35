//! Train/validation/test partitioning.

use serde::{Deserialize, Serialize};

use super::{ActionAnnotation, Category, Corpus, CorpusError};
use crate::rng::SeededRng;

pub const MIN_SPLIT_ITEMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub category: Category,
    pub seed: u64,
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> DatasetSplit<T> {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn try_map<U, E>(&self, mut f: impl FnMut(&T) -> Result<U, E>) -> Result<DatasetSplit<U>, E> {
        Ok(DatasetSplit {
            category: self.category,
            seed: self.seed,
            train: self.train.iter().map(&mut f).collect::<Result<_, _>>()?,
            validation: self.validation.iter().map(&mut f).collect::<Result<_, _>>()?,
            test: self.test.iter().map(&mut f).collect::<Result<_, _>>()?,
        })
    }
}

/// `(train, validation, test)` sizes for `n` items: test and validation are
/// each `0.2 * n` rounded half up, train takes the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let fifth = (2 * n + 5) / 10;
    (n - 2 * fifth, fifth, fifth)
}

/// Shuffle `items` with the seed and cut them into test, validation, train (in
/// that order of the shuffled sequence).
pub fn split_items<T>(items: Vec<T>, category: Category, seed: u64) -> Result<DatasetSplit<T>, CorpusError> {
    if items.len() < MIN_SPLIT_ITEMS {
        return Err(CorpusError::TooFewItems {
            category,
            available: items.len(),
            required: MIN_SPLIT_ITEMS,
        });
    }
    let (_, n_val, n_test) = split_sizes(items.len());
    let mut items = items;
    SeededRng::for_purpose(seed, &format!("split/{}", category.slug())).shuffle(&mut items);
    let mut rest = items.into_iter();
    let test: Vec<T> = rest.by_ref().take(n_test).collect();
    let validation: Vec<T> = rest.by_ref().take(n_val).collect();
    let train: Vec<T> = rest.collect();
    Ok(DatasetSplit {
        category,
        seed,
        train,
        validation,
        test,
    })
}

/// Split the gold annotations of one category.
pub fn split_dataset(
    corpus: &Corpus,
    category: Category,
    seed: u64,
) -> Result<DatasetSplit<ActionAnnotation>, CorpusError> {
    let items = corpus
        .annotations_of(category)
        .into_iter()
        .cloned()
        .collect();
    split_items(items, category, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn reported_category_sizes() {
        assert_eq!(split_sizes(64), (38, 13, 13));
        assert_eq!(split_sizes(83), (49, 17, 17));
        assert_eq!(split_sizes(253), (151, 51, 51));
        assert_eq!(split_sizes(5), (3, 1, 1));
        assert_eq!(split_sizes(64).2 + split_sizes(83).2 + split_sizes(253).2, 81);
    }

    #[test]
    fn too_few_items() {
        let err = split_items(vec![1, 2, 3, 4], Category::Goal, 1).unwrap_err();
        assert!(matches!(err, CorpusError::TooFewItems { available: 4, .. }));
    }

    proptest! {
        #[test]
        fn partitions_deterministically(n in 5usize..300, seed in any::<u64>(), other in any::<u64>()) {
            let items: Vec<usize> = (0..n).collect();
            let a = split_items(items.clone(), Category::Dp, seed).unwrap();
            let b = split_items(items.clone(), Category::Dp, seed).unwrap();
            prop_assert_eq!(&a, &b);

            let all: BTreeSet<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(a.len(), n);
            prop_assert_eq!(a.sizes(), split_sizes(n));

            let c = split_items(items, Category::Dp, other).unwrap();
            prop_assert_eq!(c.sizes(), a.sizes());
        }
    }
}
