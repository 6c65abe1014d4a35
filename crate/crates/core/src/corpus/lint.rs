//! Machine-checkable annotation heuristics. Findings are warnings only.

use std::fmt;

use serde::Serialize;

use super::{ActionAnnotation, ArgKind, Category, Corpus, ItemRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LintRule {
    /// Step verbs take UI components, not data types.
    H1StepArguments,
    /// Lists inside one span should be annotated element by element.
    H5ListInSpan,
    /// An argument span overlaps the verb span (annotator records only).
    ArgumentOverlapsVerb,
}

impl fmt::Display for LintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LintRule::H1StepArguments => "H1",
            LintRule::H5ListInSpan => "H5",
            LintRule::ArgumentOverlapsVerb => "overlap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub rule: LintRule,
    /// `"gold"` or the annotator id.
    pub source: String,
    pub item: ItemRef,
    pub message: String,
}

const LIST_SEPARATORS: [&str; 3] = ["and", "or", ","];

pub fn lint_corpus(corpus: &Corpus) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    for a in &corpus.gold_annotations {
        lint_annotation(corpus, a, "gold", &mut findings);
    }
    for record in &corpus.annotator_records {
        for a in &record.annotations {
            lint_annotation(corpus, a, &record.annotator_id, &mut findings);
        }
    }
    findings
}

fn lint_annotation(corpus: &Corpus, a: &ActionAnnotation, source: &str, out: &mut Vec<LintFinding>) {
    let Some(sentence) = corpus.sentence_of(a) else {
        return;
    };
    let mut push = |rule, message: String| {
        out.push(LintFinding {
            rule,
            source: source.to_string(),
            item: a.item_ref(),
            message,
        })
    };

    if a.category == Category::Step {
        if a.arguments.iter().any(|g| g.kind == ArgKind::DataType) {
            push(
                LintRule::H1StepArguments,
                "step action carries a data-type argument".into(),
            );
        }
        if !a.arguments.iter().any(|g| g.kind == ArgKind::UiComponent) {
            push(
                LintRule::H1StepArguments,
                "step action has no UI-component argument".into(),
            );
        }
    }

    for arg in &a.arguments {
        if arg.range.len() > 2 {
            let inner = &sentence.tokens[arg.range.start + 1..arg.range.end];
            if let Some(sep) = inner
                .iter()
                .find(|t| LIST_SEPARATORS.contains(&t.text.to_lowercase().as_str()))
            {
                push(
                    LintRule::H5ListInSpan,
                    format!(
                        "{} span {:?} contains list separator {:?}; split into one span per element",
                        arg.kind,
                        sentence.surface(arg.range),
                        sep.text
                    ),
                );
            }
        }
        if arg.range.overlaps(&a.verb_range) {
            push(
                LintRule::ArgumentOverlapsVerb,
                format!("{} span {} overlaps verb span {}", arg.kind, arg.range, a.verb_range),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use serde_json::json;

    fn corpus_with(annotation: serde_json::Value) -> Corpus {
        parse_corpus(
            &json!({
                "scenarios": [{"id":"s","raw_text":"I tap the save button to store my name and email.",
                    "sentences":[{"index":0,"tokens":["I","tap","the","save","button","to","store","my","name","and","email","."]}]}],
                "gold_annotations": [annotation]
            })
            .to_string(),
        )
        .unwrap()
    }

    #[test]
    fn step_with_ui_component_is_clean() {
        let c = corpus_with(json!({"scenario_id":"s","sentence_index":0,"verb_range":[1,1],"verb_lemma":"tap",
            "category":"step","actor":"user","arguments":[{"kind":"ui_component","range":[3,4]}]}));
        assert!(lint_corpus(&c).is_empty());
    }

    #[test]
    fn step_with_data_type_warns_h1() {
        let c = corpus_with(json!({"scenario_id":"s","sentence_index":0,"verb_range":[1,1],"verb_lemma":"tap",
            "category":"step","actor":"user","arguments":[
                {"kind":"ui_component","range":[3,4]},{"kind":"data_type","range":[8,8]}]}));
        let findings = lint_corpus(&c);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule, LintRule::H1StepArguments);
    }

    #[test]
    fn step_without_ui_component_warns_h1() {
        let c = corpus_with(json!({"scenario_id":"s","sentence_index":0,"verb_range":[1,1],"verb_lemma":"tap",
            "category":"step","actor":"user","arguments":[]}));
        assert_eq!(lint_corpus(&c)[0].rule, LintRule::H1StepArguments);
    }

    #[test]
    fn list_inside_span_warns_h5() {
        let c = corpus_with(json!({"scenario_id":"s","sentence_index":0,"verb_range":[6,6],"verb_lemma":"store",
            "category":"dp","actor":"app","arguments":[{"kind":"data_type","range":[8,10]}]}));
        let findings = lint_corpus(&c);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule, LintRule::H5ListInSpan);
        assert!(findings[0].message.contains("name and email"));
    }

    #[test]
    fn separator_at_span_edge_is_not_a_list() {
        let c = corpus_with(json!({"scenario_id":"s","sentence_index":0,"verb_range":[6,6],"verb_lemma":"store",
            "category":"dp","actor":"app","arguments":[{"kind":"data_type","range":[8,9]}]}));
        assert!(lint_corpus(&c).is_empty());
    }
}
