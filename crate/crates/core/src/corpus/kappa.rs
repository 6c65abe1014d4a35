//! Token-level inter-annotator agreement.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::Serialize;

use super::{AnnotatorRecord, ArgKind, Category, Corpus, CorpusError, Scenario};

/// Cohen's kappa over two aligned label sequences.
///
/// Computed in integer arithmetic, `(n*agree - Σ ca*cb) / (n² - Σ ca*cb)`,
/// so the result is exactly symmetric in its arguments. Perfect observed
/// agreement returns 1.0, including the degenerate single-label case.
pub fn cohen_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64, CorpusError> {
    if labels_a.len() != labels_b.len() {
        return Err(CorpusError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let n = labels_a.len() as u128;
    let mut agree = 0u128;
    let mut counts: HashMap<&T, (u128, u128)> = HashMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        if a == b {
            agree += 1;
        }
        counts.entry(a).or_default().0 += 1;
        counts.entry(b).or_default().1 += 1;
    }
    if agree == n {
        return Ok(1.0);
    }
    let chance: u128 = counts.values().map(|(ca, cb)| ca * cb).sum();
    let num = (n * agree) as f64 - chance as f64;
    let den = (n * n) as f64 - chance as f64;
    Ok(num / den)
}

/// One label per token of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TokenLabel {
    Outside,
    Verb(Category),
    Arg(ArgKind),
}

impl fmt::Display for TokenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenLabel::Outside => f.write_str("O"),
            TokenLabel::Verb(c) => write!(f, "verb:{c}"),
            TokenLabel::Arg(k) => write!(f, "arg:{k}"),
        }
    }
}

/// Flatten an annotator's record into per-token labels over the whole
/// scenario. Verb labels win over argument labels where they overlap.
pub fn annotation_to_token_labels(
    record: &AnnotatorRecord,
    scenario: &Scenario,
) -> Result<Vec<TokenLabel>, CorpusError> {
    let mut offsets = Vec::with_capacity(scenario.sentences.len());
    let mut total = 0;
    for s in &scenario.sentences {
        offsets.push(total);
        total += s.len();
    }
    let mut labels = vec![TokenLabel::Outside; total];

    let locate = |ai: usize, a: &super::ActionAnnotation| -> Result<(usize, usize), CorpusError> {
        if a.scenario_id != scenario.id || record.scenario_id != scenario.id {
            return Err(CorpusError::DanglingReference {
                pointer: format!("/annotations/{ai}/scenario_id"),
                detail: format!("annotation for {:?} applied to scenario {:?}", a.scenario_id, scenario.id),
            });
        }
        match scenario.sentences.get(a.sentence_index) {
            Some(s) => Ok((offsets[a.sentence_index], s.len())),
            None => Err(CorpusError::DanglingReference {
                pointer: format!("/annotations/{ai}/sentence_index"),
                detail: format!("no sentence {} in scenario {:?}", a.sentence_index, scenario.id),
            }),
        }
    };

    for (ai, a) in record.annotations.iter().enumerate() {
        let (offset, len) = locate(ai, a)?;
        for arg in &a.arguments {
            if !arg.range.fits(len) {
                return Err(CorpusError::OutOfRange {
                    pointer: format!("/annotations/{ai}/arguments"),
                    detail: format!("range {} on a {len}-token sentence", arg.range),
                });
            }
            for i in arg.range.start..=arg.range.end {
                labels[offset + i] = TokenLabel::Arg(arg.kind);
            }
        }
    }
    for (ai, a) in record.annotations.iter().enumerate() {
        let (offset, len) = locate(ai, a)?;
        if !a.verb_range.fits(len) {
            return Err(CorpusError::OutOfRange {
                pointer: format!("/annotations/{ai}/verb_range"),
                detail: format!("range {} on a {len}-token sentence", a.verb_range),
            });
        }
        for i in a.verb_range.start..=a.verb_range.end {
            labels[offset + i] = TokenLabel::Verb(a.category);
        }
    }
    Ok(labels)
}

/// Agreement between two annotators over every scenario both coded: label
/// sequences are concatenated in scenario order before computing kappa.
pub fn pooled_kappa(
    pairs: &[(&AnnotatorRecord, &AnnotatorRecord, &Scenario)],
) -> Result<f64, CorpusError> {
    let mut a_all = Vec::new();
    let mut b_all = Vec::new();
    for (a, b, scenario) in pairs {
        a_all.extend(annotation_to_token_labels(a, scenario)?);
        b_all.extend(annotation_to_token_labels(b, scenario)?);
    }
    cohen_kappa(&a_all, &b_all)
}

/// Pooled kappa between annotators `a` and `b` over every scenario both
/// coded, with the number of such scenarios.
pub fn corpus_kappa(corpus: &Corpus, a: &str, b: &str) -> Result<(f64, usize), CorpusError> {
    let mut pairs = Vec::new();
    for scenario in &corpus.scenarios {
        let find = |id: &str| {
            corpus
                .annotator_records
                .iter()
                .find(|r| r.annotator_id == id && r.scenario_id == scenario.id)
        };
        if let (Some(ra), Some(rb)) = (find(a), find(b)) {
            pairs.push((ra, rb, scenario));
        }
    }
    if pairs.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    Ok((pooled_kappa(&pairs)?, pairs.len()))
}

/// Distinct annotator ids, sorted.
pub fn annotator_ids(corpus: &Corpus) -> Vec<String> {
    let ids: std::collections::BTreeSet<&String> = corpus.annotator_records.iter().map(|r| &r.annotator_id).collect();
    ids.into_iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, ActionAnnotation, Actor, ArgumentSpan, Sentence, TokenRange};
    use proptest::prelude::*;

    /// Textbook kappa from marginal proportions, in floating point.
    fn kappa_oracle(a: &[u8], b: &[u8]) -> f64 {
        let n = a.len() as f64;
        let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
        let mut pe = 0.0;
        for label in 0..=u8::MAX {
            let pa = a.iter().filter(|x| **x == label).count() as f64 / n;
            let pb = b.iter().filter(|x| **x == label).count() as f64 / n;
            pe += pa * pb;
        }
        if po == 1.0 {
            1.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }

    #[test]
    fn fixtures() {
        assert_eq!(cohen_kappa(&["X", "O", "X"], &["X", "O", "X"]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&["X", "X", "O", "O"], &["X", "O", "X", "O"]).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&["X", "X", "X", "O"], &["X", "X", "O", "O"]).unwrap(), 0.5);
        assert_eq!(cohen_kappa(&["O", "O"], &["O", "O"]).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(cohen_kappa(&["X"], &["X", "O"]), Err(CorpusError::LengthMismatch { .. })));
        assert!(matches!(cohen_kappa::<&str>(&[], &[]), Err(CorpusError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_oracle(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..60)) {
            let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let k = cohen_kappa(&a, &b).unwrap();
            prop_assert_eq!(k, cohen_kappa(&b, &a).unwrap());
            prop_assert!((k - kappa_oracle(&a, &b)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&k));
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn joint_permutation_invariant(pairs in prop::collection::vec((0u8..3, 0u8..3), 1..40), seed in any::<u64>()) {
            let mut shuffled = pairs.clone();
            crate::rng::SeededRng::new(seed).shuffle(&mut shuffled);
            let split = |v: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { v.iter().copied().unzip() };
            let (a, b) = split(&pairs);
            let (c, d) = split(&shuffled);
            prop_assert_eq!(cohen_kappa(&a, &b).unwrap(), cohen_kappa(&c, &d).unwrap());
        }
    }

    fn scenario() -> Scenario {
        let toks = tokenize("I really want promotions of all kinds");
        Scenario {
            id: "s".into(),
            app_name: None,
            raw_text: "I really want promotions of all kinds".into(),
            sentences: vec![Sentence {
                scenario_id: "s".into(),
                sentence_index: 0,
                tokens: toks,
            }],
        }
    }

    fn record(annotations: Vec<ActionAnnotation>) -> AnnotatorRecord {
        AnnotatorRecord {
            annotator_id: "a".into(),
            scenario_id: "s".into(),
            annotations,
        }
    }

    fn dp_get(args: Vec<ArgumentSpan>) -> ActionAnnotation {
        ActionAnnotation {
            scenario_id: "s".into(),
            sentence_index: 0,
            verb_range: TokenRange::single(3),
            verb_lemma: "want".into(),
            category: Category::Dp,
            actor: Actor::User,
            actor_name: None,
            arguments: args,
        }
    }

    #[test]
    fn empty_record_is_all_outside() {
        let labels = annotation_to_token_labels(&record(vec![]), &scenario()).unwrap();
        assert_eq!(labels.len(), 7);
        assert!(labels.iter().all(|l| *l == TokenLabel::Outside));
    }

    #[test]
    fn verb_and_argument_labels() {
        let rec = record(vec![dp_get(vec![ArgumentSpan {
            kind: ArgKind::DataType,
            range: TokenRange::new(5, 6),
        }])]);
        let mut s = scenario();
        s.sentences[0].tokens = tokenize("a b c d e f g h");
        let labels: Vec<String> = annotation_to_token_labels(&rec, &s)
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(
            labels,
            ["O", "O", "O", "verb:DP", "O", "arg:DataType", "arg:DataType", "O"]
        );
    }

    #[test]
    fn verb_wins_on_overlap() {
        let rec = record(vec![dp_get(vec![ArgumentSpan {
            kind: ArgKind::DataType,
            range: TokenRange::new(2, 4),
        }])]);
        let labels = annotation_to_token_labels(&rec, &scenario()).unwrap();
        assert_eq!(labels[3], TokenLabel::Verb(Category::Dp));
        assert_eq!(labels[2], TokenLabel::Arg(ArgKind::DataType));
    }

    #[test]
    fn dangling_sentence() {
        let mut a = dp_get(vec![]);
        a.sentence_index = 4;
        assert!(matches!(
            annotation_to_token_labels(&record(vec![a]), &scenario()),
            Err(CorpusError::DanglingReference { .. })
        ));
    }

    #[test]
    fn two_records_agreement() {
        let s = scenario();
        let a = record(vec![dp_get(vec![ArgumentSpan { kind: ArgKind::DataType, range: TokenRange::single(4) }])]);
        let b = record(vec![dp_get(vec![ArgumentSpan { kind: ArgKind::DataType, range: TokenRange::new(4, 6) }])]);
        let la = annotation_to_token_labels(&a, &s).unwrap();
        let lb = annotation_to_token_labels(&b, &s).unwrap();
        let k = pooled_kappa(&[(&a, &b, &s)]).unwrap();
        assert_eq!(k, cohen_kappa(&la, &lb).unwrap());
        // 7 tokens, 5 agree; a: O×5, V, D; b: O×3, V, D×3 → Σ ca*cb = 5*3 + 1*1 + 1*3 = 19
        let expected = (7.0 * 5.0 - 19.0) / (49.0 - 19.0);
        assert!((k - expected).abs() < 1e-15);
    }
}
