//! Ground-truth summaries in controlled natural language.
//!
//! Each category has a fixed sentence skeleton: actor, verb in third person
//! singular, then argument slots in a fixed order. Multiple arguments in one
//! slot are joined with "and"; empty slots are left out. Argument text is
//! copied verbatim from the source sentence, which keeps the gold summaries
//! extractive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    detokenize, normalize_tokens, ActionAnnotation, Actor, ArgKind, Category, Corpus, ItemRef,
    Scenario, Sentence, TokenRange, TRIGGER_CLOSE, TRIGGER_OPEN,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GoldError {
    #[error("verb lemma is empty")]
    EmptyLemma,
    #[error("token range {range} is invalid for a {len}-token sentence")]
    InvalidRange { range: TokenRange, len: usize },
    #[error("annotation {0} does not resolve against the corpus")]
    DanglingReference(ItemRef),
}

/// Slot order for a category.
pub fn slot_order(category: Category) -> &'static [ArgKind] {
    match category {
        Category::Goal => &[ArgKind::DataType, ArgKind::Purpose, ArgKind::ExternalEntity],
        Category::Step => &[ArgKind::UiComponent, ArgKind::Purpose, ArgKind::ExternalEntity],
        Category::Dp => &[
            ArgKind::DataType,
            ArgKind::UiComponent,
            ArgKind::Purpose,
            ArgKind::ExternalEntity,
        ],
    }
}

pub fn slot_allowed(category: Category, kind: ArgKind) -> bool {
    slot_order(category).contains(&kind)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTemplate {
    pub category: Category,
    pub actor_surface: String,
    pub verb_lemma: String,
    pub verb_3sg: String,
    pub slots: BTreeMap<ArgKind, Vec<String>>,
}

impl SummaryTemplate {
    pub fn new(category: Category, actor_surface: &str, verb_lemma: &str) -> Result<Self, GoldError> {
        Ok(Self {
            category,
            actor_surface: actor_surface.to_string(),
            verb_lemma: verb_lemma.to_string(),
            verb_3sg: conjugate_third_person(verb_lemma)?,
            slots: BTreeMap::new(),
        })
    }

    pub fn with_slot(mut self, kind: ArgKind, args: &[&str]) -> Self {
        self.slots
            .entry(kind)
            .or_default()
            .extend(args.iter().map(|s| s.to_string()));
        self
    }

    /// Arguments of one slot (empty when the slot is unused).
    pub fn slot(&self, kind: ArgKind) -> &[String] {
        self.slots.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Only legal slots with non-empty argument strings.
    pub fn is_well_formed(&self) -> bool {
        !self.actor_surface.trim().is_empty()
            && !self.verb_3sg.trim().is_empty()
            && self.slots.iter().all(|(kind, args)| {
                slot_allowed(self.category, *kind) && args.iter().all(|a| !a.trim().is_empty())
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedSummary {
    pub text: String,
    pub source: SummaryTemplate,
}

impl RenderedSummary {
    pub fn new(source: SummaryTemplate) -> Self {
        Self {
            text: render_summary(&source),
            source,
        }
    }
}

const IRREGULAR: [(&str, &str); 4] = [("have", "has"), ("do", "does"), ("go", "goes"), ("be", "is")];

/// Third person singular present of a base-form verb. For a phrasal verb
/// ("sign up") only the head word is inflected.
pub fn conjugate_third_person(lemma: &str) -> Result<String, GoldError> {
    let lemma = lemma.trim();
    let Some(head) = lemma.split_whitespace().next() else {
        return Err(GoldError::EmptyLemma);
    };
    let tail = &lemma[head.len()..];
    let inflected = if let Some((_, irregular)) = IRREGULAR.iter().find(|(base, _)| *base == head) {
        irregular.to_string()
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| head.ends_with(s)) {
        format!("{head}es")
    } else if head.len() > 1
        && head.ends_with('y')
        && !matches!(head.as_bytes()[head.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u')
    {
        format!("{}ies", &head[..head.len() - 1])
    } else {
        format!("{head}s")
    };
    Ok(format!("{inflected}{tail}"))
}

/// Sentence text with the trigger markers wrapped around the verb span.
pub fn mark_trigger(sentence: &Sentence, verb_range: TokenRange) -> Result<String, GoldError> {
    if !verb_range.fits(sentence.len()) {
        return Err(GoldError::InvalidRange {
            range: verb_range,
            len: sentence.len(),
        });
    }
    let mut tokens: Vec<&str> = Vec::with_capacity(sentence.len() + 2);
    for (i, t) in sentence.tokens.iter().enumerate() {
        if i == verb_range.start {
            tokens.push(TRIGGER_OPEN);
        }
        tokens.push(&t.text);
        if i == verb_range.end {
            tokens.push(TRIGGER_CLOSE);
        }
    }
    Ok(detokenize(&tokens))
}

pub fn actor_surface(annotation: &ActionAnnotation) -> String {
    match annotation.actor {
        Actor::User => "User".to_string(),
        Actor::App => "App".to_string(),
        Actor::External => annotation.actor_name.clone().unwrap_or_default(),
    }
}

/// Fill the category's template from an annotation. Arguments whose kind has
/// no slot in the category are dropped with a warning.
pub fn build_template(annotation: &ActionAnnotation, scenario: &Scenario) -> Result<SummaryTemplate, GoldError> {
    let sentence = scenario
        .sentences
        .get(annotation.sentence_index)
        .filter(|_| scenario.id == annotation.scenario_id)
        .ok_or_else(|| GoldError::DanglingReference(annotation.item_ref()))?;
    let mut template = SummaryTemplate::new(
        annotation.category,
        &actor_surface(annotation),
        &annotation.verb_lemma.to_lowercase(),
    )?;

    let mut args = annotation.arguments.clone();
    args.sort_by_key(|a| (a.range.start, a.range.end));
    for arg in args {
        if !arg.range.fits(sentence.len()) {
            return Err(GoldError::InvalidRange {
                range: arg.range,
                len: sentence.len(),
            });
        }
        if !slot_allowed(annotation.category, arg.kind) {
            log::warn!(
                "{}: dropping {} argument {:?}, no such slot for {} actions",
                annotation.item_ref(),
                arg.kind,
                sentence.surface(arg.range),
                annotation.category
            );
            continue;
        }
        template
            .slots
            .entry(arg.kind)
            .or_default()
            .push(sentence.surface(arg.range));
    }
    Ok(template)
}

pub fn render_summary(template: &SummaryTemplate) -> String {
    let mut segments = vec![template.actor_surface.clone(), template.verb_3sg.clone()];
    for kind in slot_order(template.category) {
        let args = template.slot(*kind);
        if !args.is_empty() {
            segments.push(args.join(" and "));
        }
    }
    segments.join(" ")
}

/// One annotated action prepared for prompting: the marked input sentence and
/// its rendered gold summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldExample {
    pub item: ItemRef,
    pub category: Category,
    pub input: String,
    pub gold: String,
    pub template: SummaryTemplate,
}

/// The `render-gold` line format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLine {
    pub scenario_id: String,
    pub sentence_index: usize,
    pub category: Category,
    pub input: String,
    pub gold: String,
}

impl From<&GoldExample> for GoldLine {
    fn from(e: &GoldExample) -> Self {
        Self {
            scenario_id: e.item.scenario_id.clone(),
            sentence_index: e.item.sentence_index,
            category: e.category,
            input: e.input.clone(),
            gold: e.gold.clone(),
        }
    }
}

pub fn gold_example(corpus: &Corpus, annotation: &ActionAnnotation) -> Result<GoldExample, GoldError> {
    let scenario = corpus
        .scenario(&annotation.scenario_id)
        .ok_or_else(|| GoldError::DanglingReference(annotation.item_ref()))?;
    let sentence = scenario
        .sentences
        .get(annotation.sentence_index)
        .ok_or_else(|| GoldError::DanglingReference(annotation.item_ref()))?;
    let template = build_template(annotation, scenario)?;
    Ok(GoldExample {
        item: annotation.item_ref(),
        category: annotation.category,
        input: mark_trigger(sentence, annotation.verb_range)?,
        gold: render_summary(&template),
        template,
    })
}

/// Gold examples for every gold annotation, in corpus order.
pub fn render_gold(corpus: &Corpus) -> Result<Vec<GoldExample>, GoldError> {
    corpus
        .gold_annotations
        .iter()
        .map(|a| gold_example(corpus, a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArgumentMatch {
    pub kind: ArgKind,
    pub text: String,
    pub matched: bool,
    /// Token span `[start, end)` in the normalized text, when matched.
    pub span: Option<(usize, usize)>,
}

/// How a piece of text lines up with the slots of a gold template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotAlignment {
    /// Normalized tokens of the analysed text.
    pub tokens: Vec<String>,
    pub actor_matched: bool,
    pub verb_matched: bool,
    pub verb_span: Option<(usize, usize)>,
    pub arguments: Vec<ArgumentMatch>,
    /// Positions of tokens matched to nothing and not scaffold.
    pub leftover_positions: Vec<usize>,
    pub leftovers: Vec<String>,
}

impl SlotAlignment {
    pub fn fully_matched(&self) -> bool {
        self.actor_matched && self.verb_matched && self.arguments.iter().all(|a| a.matched)
    }

    pub fn missing(&self, kind: ArgKind) -> bool {
        self.arguments.iter().any(|a| a.kind == kind && !a.matched)
    }
}

/// Locate each gold element (actor, verb, arguments) in `text` as a contiguous
/// run of normalized tokens. The verb matches in either lemma or inflected
/// form. Tokens covered by no element, other than "and" and the actor
/// surface, are reported as leftovers.
pub fn parse_summary(text: &str, gold: &SummaryTemplate) -> SlotAlignment {
    let tokens = normalize_tokens(text);
    let mut covered = vec![false; tokens.len()];
    let mut cursor = 0;

    let actor = normalize_tokens(&gold.actor_surface);
    let actor_span = claim(&tokens, &mut covered, &mut cursor, &actor);

    let verb_span = [&gold.verb_3sg, &gold.verb_lemma]
        .iter()
        .map(|form| normalize_tokens(form))
        .find_map(|needle| claim(&tokens, &mut covered, &mut cursor, &needle));

    let mut arguments = Vec::new();
    for kind in slot_order(gold.category) {
        for arg in gold.slot(*kind) {
            let needle = normalize_tokens(arg);
            let span = claim(&tokens, &mut covered, &mut cursor, &needle);
            arguments.push(ArgumentMatch {
                kind: *kind,
                text: arg.clone(),
                matched: span.is_some(),
                span,
            });
        }
    }

    let mut leftover_positions = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if !covered[i] && tok != "and" && !actor.contains(tok) {
            leftover_positions.push(i);
        }
    }
    SlotAlignment {
        leftovers: leftover_positions.iter().map(|&i| tokens[i].clone()).collect(),
        tokens,
        actor_matched: actor_span.is_some(),
        verb_matched: verb_span.is_some(),
        verb_span,
        arguments,
        leftover_positions,
    }
}

/// Find `needle` in `tokens`: first an uncovered occurrence at or after the
/// cursor, then any uncovered occurrence, then any occurrence at all. Marks
/// the chosen positions covered and advances the cursor past it.
fn claim(
    tokens: &[String],
    covered: &mut [bool],
    cursor: &mut usize,
    needle: &[String],
) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return Some((*cursor, *cursor));
    }
    if needle.len() > tokens.len() {
        return None;
    }
    let occurrences: Vec<usize> = (0..=tokens.len() - needle.len())
        .filter(|&i| tokens[i..i + needle.len()] == *needle)
        .collect();
    let free = |i: &&usize| covered[**i..**i + needle.len()].iter().all(|c| !c);
    let start = occurrences
        .iter()
        .filter(|i| **i >= *cursor)
        .find(free)
        .or_else(|| occurrences.iter().find(free))
        .or_else(|| occurrences.first())
        .copied()?;
    let end = start + needle.len();
    covered[start..end].iter_mut().for_each(|c| *c = true);
    *cursor = (*cursor).max(end);
    Some((start, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, ArgumentSpan};
    use proptest::prelude::*;

    fn sentence(text: &str) -> Sentence {
        Sentence {
            scenario_id: "s".into(),
            sentence_index: 0,
            tokens: tokenize(text),
        }
    }

    fn scenario(text: &str) -> Scenario {
        Scenario {
            id: "s".into(),
            app_name: None,
            raw_text: text.into(),
            sentences: vec![sentence(text)],
        }
    }

    const PROMO: &str = "If I opt in, I would probably be able to get regular promotions offered to me.";

    fn promo_annotation() -> ActionAnnotation {
        ActionAnnotation {
            scenario_id: "s".into(),
            sentence_index: 0,
            verb_range: TokenRange::single(11),
            verb_lemma: "get".into(),
            category: Category::Goal,
            actor: Actor::User,
            actor_name: None,
            arguments: vec![ArgumentSpan {
                kind: ArgKind::DataType,
                range: TokenRange::single(13),
            }],
        }
    }

    #[test]
    fn conjugation_rules() {
        assert_eq!(conjugate_third_person("get").unwrap(), "gets");
        assert_eq!(conjugate_third_person("search").unwrap(), "searches");
        assert_eq!(conjugate_third_person("be").unwrap(), "is");
        assert_eq!(conjugate_third_person("have").unwrap(), "has");
        assert_eq!(conjugate_third_person("apply").unwrap(), "applies");
        assert_eq!(conjugate_third_person("play").unwrap(), "plays");
        assert_eq!(conjugate_third_person("fix").unwrap(), "fixes");
        assert_eq!(conjugate_third_person("sign up").unwrap(), "signs up");
        assert_eq!(conjugate_third_person(""), Err(GoldError::EmptyLemma));
    }

    #[test]
    fn trigger_marking() {
        let s = sentence("I get promotions");
        assert_eq!(mark_trigger(&s, TokenRange::single(1)).unwrap(), "I ⟨tgr⟩get⟨/tgr⟩ promotions");
        let s = sentence("I sign up today");
        assert_eq!(mark_trigger(&s, TokenRange::new(1, 2)).unwrap(), "I ⟨tgr⟩sign up⟨/tgr⟩ today");
        assert_eq!(mark_trigger(&s, TokenRange::new(0, 3)).unwrap(), "⟨tgr⟩I sign up today⟨/tgr⟩");
        assert!(mark_trigger(&s, TokenRange::new(2, 4)).is_err());
    }

    #[test]
    fn promotion_example_renders() {
        let sc = scenario(PROMO);
        assert_eq!(sc.sentences[0].tokens[11].text, "get");
        assert_eq!(sc.sentences[0].tokens[13].text, "promotions");
        let t = build_template(&promo_annotation(), &sc).unwrap();
        assert_eq!(t.actor_surface, "User");
        assert_eq!(t.verb_3sg, "gets");
        assert_eq!(t.slot(ArgKind::DataType), ["promotions"]);
        assert_eq!(render_summary(&t), "User gets promotions");
        assert_eq!(
            mark_trigger(&sc.sentences[0], TokenRange::single(11)).unwrap(),
            "If I opt in, I would probably be able to ⟨tgr⟩get⟨/tgr⟩ regular promotions offered to me."
        );
    }

    #[test]
    fn empty_slots_are_omitted() {
        let t = SummaryTemplate::new(Category::Dp, "App", "update").unwrap();
        assert_eq!(render_summary(&t), "App updates");
    }

    #[test]
    fn multiple_arguments_join_with_and() {
        let t = SummaryTemplate::new(Category::Dp, "App", "collect")
            .unwrap()
            .with_slot(ArgKind::DataType, &["name", "email"])
            .with_slot(ArgKind::Purpose, &["to create an account"]);
        assert_eq!(render_summary(&t), "App collects name and email to create an account");
    }

    #[test]
    fn slot_order_follows_category() {
        let t = SummaryTemplate::new(Category::Dp, "App", "share")
            .unwrap()
            .with_slot(ArgKind::ExternalEntity, &["with advertisers"])
            .with_slot(ArgKind::Purpose, &["for ads"])
            .with_slot(ArgKind::UiComponent, &["profile page"])
            .with_slot(ArgKind::DataType, &["location"]);
        assert_eq!(render_summary(&t), "App shares location profile page for ads with advertisers");
    }

    #[test]
    fn illegal_arguments_dropped() {
        let sc = scenario("I tap the button to save my email");
        let a = ActionAnnotation {
            scenario_id: "s".into(),
            sentence_index: 0,
            verb_range: TokenRange::single(1),
            verb_lemma: "tap".into(),
            category: Category::Step,
            actor: Actor::User,
            actor_name: None,
            arguments: vec![
                ArgumentSpan { kind: ArgKind::DataType, range: TokenRange::single(7) },
                ArgumentSpan { kind: ArgKind::UiComponent, range: TokenRange::single(3) },
            ],
        };
        let t = build_template(&a, &sc).unwrap();
        assert!(!t.slots.contains_key(&ArgKind::DataType));
        assert_eq!(render_summary(&t), "User taps button");
    }

    #[test]
    fn arguments_follow_sentence_order() {
        let sc = scenario("App stores your email and name");
        let a = ActionAnnotation {
            scenario_id: "s".into(),
            sentence_index: 0,
            verb_range: TokenRange::single(1),
            verb_lemma: "store".into(),
            category: Category::Dp,
            actor: Actor::External,
            actor_name: Some("Google".into()),
            arguments: vec![
                ArgumentSpan { kind: ArgKind::DataType, range: TokenRange::single(5) },
                ArgumentSpan { kind: ArgKind::DataType, range: TokenRange::single(3) },
            ],
        };
        let t = build_template(&a, &sc).unwrap();
        assert_eq!(t.slot(ArgKind::DataType), ["email", "name"]);
        assert_eq!(render_summary(&t), "Google stores email and name");
    }

    #[test]
    fn parse_round_trip() {
        let t = SummaryTemplate::new(Category::Goal, "User", "get")
            .unwrap()
            .with_slot(ArgKind::DataType, &["promotions"]);
        let a = parse_summary(&render_summary(&t), &t);
        assert!(a.fully_matched());
        assert!(a.leftovers.is_empty());
    }

    #[test]
    fn parse_reports_leftovers() {
        let t = SummaryTemplate::new(Category::Goal, "User", "get")
            .unwrap()
            .with_slot(ArgKind::DataType, &["promotions"]);
        let a = parse_summary("User gets regular promotions offered", &t);
        assert!(a.fully_matched());
        assert_eq!(a.leftovers, ["regular", "offered"]);
        assert_eq!(a.leftover_positions, [2, 4]);
    }

    #[test]
    fn parse_reports_actor_mismatch() {
        let t = SummaryTemplate::new(Category::Goal, "User", "get")
            .unwrap()
            .with_slot(ArgKind::DataType, &["promotions"]);
        let a = parse_summary("App gets promotions", &t);
        assert!(!a.actor_matched);
        assert!(a.verb_matched);
        assert!(a.arguments[0].matched);
        assert_eq!(a.leftovers, ["app"]);
    }

    #[test]
    fn parse_accepts_lemma_form() {
        let t = SummaryTemplate::new(Category::Goal, "User", "get").unwrap();
        assert!(parse_summary("user get", &t).verb_matched);
        assert!(!parse_summary("user got", &t).verb_matched);
    }

    const VOCAB: &[&str] = &["name", "email", "and", "to", "create", "account", "user", "app", "the", "gets"];

    fn arb_args() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(VOCAB), 1..4).prop_map(|w| w.join(" ")),
            0..3,
        )
    }

    fn arb_template() -> impl Strategy<Value = SummaryTemplate> {
        (
            prop::sample::select(&Category::ALL[..]),
            prop::sample::select(&["User", "App", "Google Maps"][..]),
            prop::sample::select(&["get", "collect", "tap", "sign up", "share"][..]),
            arb_args(),
            arb_args(),
            arb_args(),
            arb_args(),
        )
            .prop_map(|(cat, actor, verb, a, b, c, d)| {
                let mut t = SummaryTemplate::new(cat, actor, verb).unwrap();
                for (kind, args) in slot_order(cat).iter().zip([a, b, c, d]) {
                    if !args.is_empty() {
                        t.slots.insert(*kind, args);
                    }
                }
                t
            })
    }

    proptest! {
        #[test]
        fn render_then_parse_matches_fully(t in arb_template()) {
            prop_assert!(t.is_well_formed());
            let text = render_summary(&t);
            let a = parse_summary(&text, &t);
            prop_assert!(a.fully_matched(), "{text}: {a:?}");
            prop_assert!(a.leftovers.is_empty(), "{text}: {a:?}");
        }

        #[test]
        fn render_uses_only_template_material(t in arb_template()) {
            let text = render_summary(&t);
            let mut allowed: Vec<String> = normalize_tokens(&t.actor_surface);
            allowed.extend(normalize_tokens(&t.verb_3sg));
            allowed.push("and".into());
            for args in t.slots.values() {
                for a in args {
                    allowed.extend(normalize_tokens(a));
                }
            }
            for tok in normalize_tokens(&text) {
                prop_assert!(allowed.contains(&tok));
            }
            prop_assert_eq!(render_summary(&t), text);
        }
    }
}
