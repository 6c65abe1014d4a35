//! Shared inputs for the criterion benchmarks.

use ropasum_core::corpus::synthetic::synthetic_corpus;
use ropasum_core::corpus::Category;
use ropasum_core::experiments::gold_split;
use ropasum_core::rng::SeededRng;
use ropasum_core::{DatasetSplit, GoldExample};

const WORDS: [&str; 16] = [
    "user", "app", "shares", "photos", "with", "friends", "to", "plan", "trips", "enters", "card", "in", "form",
    "orders", "food", "location",
];

/// `n` (reference, candidate) token-sequence pairs of length `len`.
pub fn token_pairs(n: usize, len: usize, seed: u64) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = SeededRng::new(seed);
    let seq = |rng: &mut SeededRng| -> Vec<String> {
        (0..len).map(|_| WORDS[rng.below(WORDS.len() as u64) as usize].to_string()).collect()
    };
    (0..n).map(|_| (seq(&mut rng), seq(&mut rng))).collect()
}

/// Gold split of a synthetic corpus with `per_category` goal items.
pub fn goal_split(per_category: usize) -> DatasetSplit<GoldExample> {
    let corpus = synthetic_corpus(&[Category::Goal], per_category, 5, false)
        .resolve()
        .expect("synthetic corpus resolves");
    gold_split(&corpus, Category::Goal, 42).expect("enough items")
}
