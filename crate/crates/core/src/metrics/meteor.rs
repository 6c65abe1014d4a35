//! METEOR with exact and stem matching stages.
//!
//! Each stage aligns the tokens left unaligned by earlier stages. Within a
//! stage the alignment maximizes the number of matches and, among maximal
//! alignments, minimizes the number of chunks of the combined alignment. A
//! chunk is a maximal run of candidate tokens aligned to consecutive
//! reference positions.
//!
//! The search is an exact memoized recursion over (candidate position, used
//! reference positions, previous alignment). Reference sides longer than 64
//! tokens fall back to a greedy left-to-right alignment.

use std::collections::HashMap;

use super::normalize_text;

const MAX_EXACT_REF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorScore {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

impl MeteorScore {
    pub const ZERO: MeteorScore = MeteorScore {
        matches: 0,
        chunks: 0,
        precision: 0.0,
        recall: 0.0,
        fmean: 0.0,
        penalty: 0.0,
        score: 0.0,
    };
}

/// `alignment[i] = Some(j)` when candidate token `i` is aligned to reference
/// token `j`.
pub type Alignment = Vec<Option<usize>>;

pub fn meteor(reference: &str, candidate: &str) -> MeteorScore {
    meteor_tokens(&normalize_text(reference), &normalize_text(candidate))
}

pub fn meteor_tokens(reference: &[String], candidate: &[String]) -> MeteorScore {
    if reference.is_empty() || candidate.is_empty() {
        return MeteorScore::ZERO;
    }
    let exact = align_stage(reference, candidate, &vec![None; candidate.len()], |c, r| c == r);
    let cand_stems: Vec<String> = candidate.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    let stemmed = align_stage(&ref_stems, &cand_stems, &exact, |c, r| c == r);
    score_alignment(&stemmed, reference.len(), candidate.len())
}

/// Number of chunks in an alignment.
pub fn count_chunks(alignment: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for a in alignment {
        match (*a, prev) {
            (Some(j), Some(p)) if j == p + 1 => {}
            (Some(_), _) => chunks += 1,
            (None, _) => {}
        }
        prev = *a;
    }
    chunks
}

fn score_alignment(alignment: &[Option<usize>], ref_len: usize, cand_len: usize) -> MeteorScore {
    let matches = alignment.iter().filter(|a| a.is_some()).count();
    if matches == 0 {
        return MeteorScore::ZERO;
    }
    let chunks = count_chunks(alignment);
    let precision = matches as f64 / cand_len as f64;
    let recall = matches as f64 / ref_len as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    MeteorScore {
        matches,
        chunks,
        precision,
        recall,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    }
}

/// Extend `fixed` with a best alignment over the still-unaligned tokens,
/// using `compatible(candidate_token, reference_token)`.
pub fn align_stage(
    reference: &[String],
    candidate: &[String],
    fixed: &[Option<usize>],
    compatible: impl Fn(&str, &str) -> bool,
) -> Alignment {
    let mut taken = vec![false; reference.len()];
    for j in fixed.iter().flatten() {
        taken[*j] = true;
    }
    let options: Vec<Vec<usize>> = candidate
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if fixed[i].is_some() {
                return Vec::new();
            }
            (0..reference.len())
                .filter(|&j| !taken[j] && compatible(c, &reference[j]))
                .collect()
        })
        .collect();

    if reference.len() > MAX_EXACT_REF {
        return greedy(fixed, &options);
    }
    let initial_mask = taken
        .iter()
        .enumerate()
        .fold(0u64, |m, (j, t)| if *t { m | (1 << j) } else { m });
    let mut search = Search {
        fixed,
        options: &options,
        memo: HashMap::new(),
    };
    search.best(0, initial_mask, None);

    let mut out = fixed.to_vec();
    let (mut mask, mut prev) = (initial_mask, None);
    for (i, slot) in out.iter_mut().enumerate() {
        let choice = search.choice(i, mask, prev);
        if let Some(j) = choice {
            *slot = Some(j);
            if fixed[i].is_none() {
                mask |= 1 << j;
            }
        }
        prev = choice;
    }
    out
}

/// Value of a sub-alignment: matches (maximize), chunks (minimize).
type Value = (usize, usize);

fn better(a: Value, b: Value) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct Search<'a> {
    fixed: &'a [Option<usize>],
    options: &'a [Vec<usize>],
    memo: HashMap<(usize, u64, Option<usize>), (Value, Option<usize>)>,
}

impl Search<'_> {
    fn best(&mut self, i: usize, mask: u64, prev: Option<usize>) -> Value {
        if i == self.fixed.len() {
            return (0, 0);
        }
        if let Some((v, _)) = self.memo.get(&(i, mask, prev)) {
            return *v;
        }
        let opens = |j: usize| usize::from(!matches!(prev, Some(p) if p + 1 == j));
        let result = if let Some(j) = self.fixed[i] {
            let (m, c) = self.best(i + 1, mask, Some(j));
            ((m + 1, c + opens(j)), Some(j))
        } else {
            let mut best = (self.best(i + 1, mask, None), None);
            for &j in &self.options[i] {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let (m, c) = self.best(i + 1, mask | (1 << j), Some(j));
                let v = (m + 1, c + opens(j));
                if better(v, best.0) {
                    best = (v, Some(j));
                }
            }
            best
        };
        self.memo.insert((i, mask, prev), result);
        result.0
    }

    fn choice(&mut self, i: usize, mask: u64, prev: Option<usize>) -> Option<usize> {
        self.best(i, mask, prev);
        self.memo[&(i, mask, prev)].1
    }
}

fn greedy(fixed: &[Option<usize>], options: &[Vec<usize>]) -> Alignment {
    let mut used: Vec<usize> = Vec::new();
    let mut out = fixed.to_vec();
    let mut prev: Option<usize> = None;
    for i in 0..out.len() {
        if out[i].is_none() {
            let free: Vec<usize> = options[i].iter().copied().filter(|j| !used.contains(j)).collect();
            let pick = prev
                .and_then(|p| free.iter().copied().find(|&j| j == p + 1))
                .or_else(|| free.first().copied());
            if let Some(j) = pick {
                used.push(j);
                out[i] = Some(j);
            }
        }
        prev = out[i];
    }
    out
}

/// Small suffix stemmer: plural, third person, past and progressive endings.
pub fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    if w.chars().count() <= 3 || !w.is_ascii() {
        return w;
    }
    let mut s = if let Some(base) = w.strip_suffix("ies").filter(|b| b.len() >= 2) {
        format!("{base}y")
    } else if let Some(base) = w.strip_suffix("sses") {
        format!("{base}ss")
    } else if ["shes", "ches", "xes", "zes"].iter().any(|x| w.ends_with(x)) {
        w[..w.len() - 2].to_string()
    } else if let Some(base) = w.strip_suffix("ing").filter(|b| b.len() >= 3) {
        undouble(base)
    } else if let Some(base) = w.strip_suffix("ed").filter(|b| b.len() >= 3) {
        undouble(base)
    } else if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        w[..w.len() - 1].to_string()
    } else {
        w
    };
    if s.len() > 3 && s.ends_with('e') {
        s.pop();
    }
    s
}

fn undouble(base: &str) -> String {
    let b = base.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'l' | b's' | b'z' | b'a' | b'e' | b'i' | b'o' | b'u') {
        base[..n - 1].to_string()
    } else {
        base.to_string()
    }
}
