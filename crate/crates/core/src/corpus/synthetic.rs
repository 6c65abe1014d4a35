//! Generated corpora for tests, benchmarks and dry runs.
//!
//! Every scenario is one templated sentence with a single annotated action,
//! so gold summaries have at least three tokens and every marked input is
//! unique. The text is not meant to read naturally.

use super::{
    tokenize_strs, ArgKind, Category, RawAnnotation, RawArgument, RawCorpus, RawRecord, RawScenario,
    RawSentence, TokenRange,
};
use crate::rng::SeededRng;

const VERBS: [&str; 8] = ["share", "upload", "enter", "save", "send", "select", "view", "update"];
const NOUNS: [&str; 10] = [
    "photos", "contacts", "location", "address", "card", "messages", "recipes", "receipts", "profile", "playlist",
];
const UI: [&str; 6] = ["gallery", "form", "menu", "button", "list", "tab"];
const PURPOSE_VERBS: [&str; 5] = ["find", "track", "order", "plan", "book"];
const PURPOSE_NOUNS: [&str; 5] = ["meals", "trips", "groceries", "rides", "events"];

/// `per_category` scenarios for each listed category. With `second_annotator`
/// set, two annotator records per scenario are added; the second disagrees
/// on the purpose span of roughly one scenario in four.
pub fn synthetic_corpus(categories: &[Category], per_category: usize, seed: u64, second_annotator: bool) -> RawCorpus {
    let mut rng = SeededRng::for_purpose(seed, "synthetic");
    let mut scenarios = Vec::new();
    let mut gold = Vec::new();
    let mut records = Vec::new();
    for category in categories {
        for i in 0..per_category {
            let id = format!("syn-{}-{i}", category.slug());
            let verb = VERBS[rng.below(VERBS.len() as u64) as usize];
            let noun = NOUNS[rng.below(NOUNS.len() as u64) as usize];
            let ui = UI[rng.below(UI.len() as u64) as usize];
            let pv = PURPOSE_VERBS[rng.below(PURPOSE_VERBS.len() as u64) as usize];
            let pn = PURPOSE_NOUNS[rng.below(PURPOSE_NOUNS.len() as u64) as usize];
            let text = format!("On day {i} I {verb} my {noun} in the {ui} to {pv} {pn}.");
            let tokens = tokenize_strs(&text);
            let data = RawArgument {
                kind: ArgKind::DataType,
                range: TokenRange::single(6),
            };
            let widget = RawArgument {
                kind: ArgKind::UiComponent,
                range: TokenRange::single(9),
            };
            let purpose = RawArgument {
                kind: ArgKind::Purpose,
                range: TokenRange::new(10, 12),
            };
            let arguments = match category {
                Category::Goal => vec![data, purpose],
                Category::Step => vec![widget, purpose],
                Category::Dp => vec![data, widget, purpose],
            };
            let annotation = RawAnnotation {
                scenario_id: Some(id.clone()),
                sentence_index: 0,
                verb_range: TokenRange::single(4),
                verb_lemma: Some(verb.to_string()),
                category: *category,
                actor: super::Actor::User,
                actor_name: None,
                arguments,
            };
            if second_annotator {
                records.push(RawRecord {
                    annotator_id: "a1".into(),
                    scenario_id: id.clone(),
                    annotations: vec![without_scenario(&annotation)],
                });
                let mut other = without_scenario(&annotation);
                if rng.below(4) == 0 {
                    if let Some(p) = other.arguments.iter_mut().find(|a| a.kind == ArgKind::Purpose) {
                        p.range = TokenRange::new(11, 12);
                    }
                }
                records.push(RawRecord {
                    annotator_id: "a2".into(),
                    scenario_id: id.clone(),
                    annotations: vec![other],
                });
            }
            gold.push(annotation);
            scenarios.push(RawScenario {
                id,
                app_name: Some("Synthetic".into()),
                raw_text: text,
                sentences: vec![RawSentence { index: 0, tokens }],
            });
        }
    }
    RawCorpus {
        scenarios,
        gold_annotations: gold,
        annotator_records: records,
    }
}

fn without_scenario(a: &RawAnnotation) -> RawAnnotation {
    RawAnnotation {
        scenario_id: None,
        ..a.clone()
    }
}
