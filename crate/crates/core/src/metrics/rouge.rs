//! ROUGE-N, ROUGE-L and ROUGE-S.

use std::collections::HashMap;
use std::hash::Hash;

use super::{normalize_text, ScoreTriple};

fn multiset<K: Eq + Hash>(items: impl IntoIterator<Item = K>) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Clipped overlap: Σ min(count_ref, count_cand) over shared keys.
fn clipped_overlap<K: Eq + Hash>(reference: &HashMap<K, usize>, candidate: &HashMap<K, usize>) -> usize {
    candidate
        .iter()
        .map(|(k, c)| reference.get(k).map_or(0, |r| *r.min(c)))
        .sum()
}

pub fn rouge_n(reference: &str, candidate: &str, n: usize) -> ScoreTriple {
    rouge_n_tokens(&normalize_text(reference), &normalize_text(candidate), n)
}

pub fn rouge_n_tokens(reference: &[String], candidate: &[String], n: usize) -> ScoreTriple {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            Vec::new()
        } else {
            t.windows(n).map(<[String]>::to_vec).collect()
        }
    };
    let r = grams(reference);
    let c = grams(candidate);
    let overlap = clipped_overlap(&multiset(r.iter()), &multiset(c.iter()));
    ScoreTriple::from_counts(overlap, c.len(), r.len())
}

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(reference: &str, candidate: &str) -> ScoreTriple {
    rouge_l_tokens(&normalize_text(reference), &normalize_text(candidate))
}

pub fn rouge_l_tokens(reference: &[String], candidate: &[String]) -> ScoreTriple {
    ScoreTriple::from_counts(lcs_len(reference, candidate), candidate.len(), reference.len())
}

/// ROUGE-S over skip-bigrams: ordered pairs `(i, j)`, `i < j`, with at most
/// `max_skip` tokens between them (unbounded when `None`).
pub fn rouge_s(reference: &str, candidate: &str, max_skip: Option<usize>) -> ScoreTriple {
    rouge_s_tokens(&normalize_text(reference), &normalize_text(candidate), max_skip)
}

pub fn rouge_s_tokens(reference: &[String], candidate: &[String], max_skip: Option<usize>) -> ScoreTriple {
    let (r, r_total) = skip_bigrams(reference, max_skip);
    let (c, c_total) = skip_bigrams(candidate, max_skip);
    ScoreTriple::from_counts(clipped_overlap(&r, &c), c_total, r_total)
}

fn skip_bigrams(t: &[String], max_skip: Option<usize>) -> (HashMap<(&str, &str), usize>, usize) {
    let mut m = HashMap::new();
    let mut total = 0;
    for i in 0..t.len() {
        let last = match max_skip {
            Some(s) => (i + s + 1).min(t.len().saturating_sub(1)),
            None => t.len().saturating_sub(1),
        };
        for j in i + 1..=last {
            *m.entry((t[i].as_str(), t[j].as_str())).or_insert(0) += 1;
            total += 1;
        }
    }
    (m, total)
}
