//! Discrepancy coding between generated and gold summaries.
//!
//! Six codes, applied as independent flags:
//!
//! 1. additional modifiers (extra tokens next to a matched argument, or
//!    extra tokens nothing else accounts for)
//! 2. incorrect action verb or subject
//! 3. missing data type
//! 4. missing purpose
//! 5. missing UI component
//! 6. more than two verbs
//!
//! The coder is a triage aid. Human reviewers can override its labels; the
//! overrides are stored next to, not over, the automatic codes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tokens, ArgKind, ItemRef, Sentence};
use crate::gold::{conjugate_third_person, parse_summary, render_summary, SlotAlignment, SummaryTemplate};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DiagnosticsError {
    #[error("no reports to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiscrepancyCode {
    AdditionalModifiers,
    IncorrectVerbOrSubject,
    MissingDataType,
    MissingPurpose,
    MissingUIComponent,
    MoreThanTwoVerbs,
}

impl DiscrepancyCode {
    pub const ALL: [DiscrepancyCode; 6] = [
        DiscrepancyCode::AdditionalModifiers,
        DiscrepancyCode::IncorrectVerbOrSubject,
        DiscrepancyCode::MissingDataType,
        DiscrepancyCode::MissingPurpose,
        DiscrepancyCode::MissingUIComponent,
        DiscrepancyCode::MoreThanTwoVerbs,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn missing_kind(kind: ArgKind) -> Option<Self> {
        match kind {
            ArgKind::DataType => Some(Self::MissingDataType),
            ArgKind::Purpose => Some(Self::MissingPurpose),
            ArgKind::UiComponent => Some(Self::MissingUIComponent),
            ArgKind::ExternalEntity => None,
        }
    }
}

impl fmt::Display for DiscrepancyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub item: Option<ItemRef>,
    pub generated: String,
    pub gold: String,
    pub codes: BTreeSet<DiscrepancyCode>,
    /// Set when the source sentence was available to check against.
    pub extractive: Option<bool>,
    pub leftovers: Vec<String>,
    /// Gold elements with no match, as "actor", "verb" or "<kind>: <text>".
    pub missing: Vec<String>,
}

/// True iff every normalized token of `generated` occurs in the source
/// sentence, is "and", belongs to the actor surface, or is the verb in lemma
/// or inflected form. Tokens failing the test are returned.
pub fn check_extractiveness(generated: &str, source: &Sentence, gold: &SummaryTemplate) -> (bool, Vec<String>) {
    let mut allowed: BTreeSet<String> = normalize_tokens(&source.text()).into_iter().collect();
    allowed.insert("and".into());
    allowed.extend(normalize_tokens(&gold.actor_surface));
    allowed.extend(normalize_tokens(&gold.verb_lemma));
    allowed.extend(normalize_tokens(&gold.verb_3sg));
    let leftovers: Vec<String> = normalize_tokens(generated)
        .into_iter()
        .filter(|t| !allowed.contains(t))
        .collect();
    (leftovers.is_empty(), leftovers)
}

/// Lowercase surface forms (head lemma and its third-person form) mapped to
/// their lexicon entry.
fn verb_forms(lexicon: &BTreeSet<String>) -> BTreeMap<String, String> {
    let mut forms = BTreeMap::new();
    for lemma in lexicon {
        let Some(head) = lemma.split_whitespace().next() else {
            continue;
        };
        let head = head.to_lowercase();
        if let Ok(s3) = conjugate_third_person(&head) {
            forms.entry(s3).or_insert_with(|| lemma.clone());
        }
        forms.entry(head).or_insert_with(|| lemma.clone());
    }
    forms
}

fn distinct_verbs(tokens: &[String], forms: &BTreeMap<String, String>) -> usize {
    tokens
        .iter()
        .filter_map(|t| forms.get(t))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Runs of consecutive positions.
fn runs(positions: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &p in positions {
        match out.last_mut() {
            Some((_, end)) if *end == p => *end = p + 1,
            _ => out.push((p, p + 1)),
        }
    }
    out
}

/// Code a generated summary against its gold template.
///
/// Leftover tokens count as explained by code 2 when they precede the first
/// matched argument (a wrong subject or verb), and by code 6 when they are
/// lexicon verbs. Code 1 fires for any remaining leftover run that touches a
/// matched argument span, or for remaining leftovers when no other code fired.
/// Code 6 requires more than two distinct lexicon verbs and more than the
/// gold rendering itself contains.
pub fn diagnose(generated: &str, gold: &SummaryTemplate, verb_lexicon: &BTreeSet<String>) -> DiagnosisReport {
    let alignment = parse_summary(generated, gold);
    let forms = verb_forms(verb_lexicon);
    let mut codes = BTreeSet::new();
    let mut missing = Vec::new();

    if !alignment.actor_matched {
        missing.push("actor".to_string());
    }
    if !alignment.verb_matched {
        missing.push("verb".to_string());
    }
    let wrong_head = !alignment.actor_matched || !alignment.verb_matched;
    if wrong_head {
        codes.insert(DiscrepancyCode::IncorrectVerbOrSubject);
    }
    for arg in alignment.arguments.iter().filter(|a| !a.matched) {
        missing.push(format!("{}: {}", arg.kind, arg.text));
        if let Some(code) = DiscrepancyCode::missing_kind(arg.kind) {
            codes.insert(code);
        }
    }
    let gold_verbs = distinct_verbs(&normalize_tokens(&render_summary(gold)), &forms);
    let too_many_verbs = distinct_verbs(&alignment.tokens, &forms) > gold_verbs.max(2);
    if too_many_verbs {
        codes.insert(DiscrepancyCode::MoreThanTwoVerbs);
    }
    if modifiers(&alignment, wrong_head, too_many_verbs, &forms, !codes.is_empty()) {
        codes.insert(DiscrepancyCode::AdditionalModifiers);
    }

    DiagnosisReport {
        item: None,
        generated: generated.to_string(),
        gold: render_summary(gold),
        codes,
        extractive: None,
        leftovers: alignment.leftovers.clone(),
        missing,
    }
}

fn modifiers(
    alignment: &SlotAlignment,
    wrong_head: bool,
    too_many_verbs: bool,
    forms: &BTreeMap<String, String>,
    other_codes: bool,
) -> bool {
    let matched_spans: Vec<(usize, usize)> = alignment
        .arguments
        .iter()
        .filter_map(|a| a.span.filter(|(s, e)| s < e))
        .collect();
    let first_arg = matched_spans.iter().map(|(s, _)| *s).min();
    let unexplained: Vec<usize> = alignment
        .leftover_positions
        .iter()
        .copied()
        .filter(|&p| !(wrong_head && first_arg.is_none_or(|f| p < f)))
        .filter(|&p| !(too_many_verbs && forms.contains_key(&alignment.tokens[p])))
        .collect();
    if unexplained.is_empty() {
        return false;
    }
    let touches = runs(&unexplained).iter().any(|&(s, e)| {
        matched_spans
            .iter()
            .any(|&(a, b)| e == a || s == b)
    });
    touches || !other_codes
}

/// [`diagnose`] plus the extractiveness check against the source sentence.
pub fn diagnose_item(
    item: &ItemRef,
    generated: &str,
    gold: &SummaryTemplate,
    source: &Sentence,
    verb_lexicon: &BTreeSet<String>,
) -> DiagnosisReport {
    let mut report = diagnose(generated, gold, verb_lexicon);
    report.item = Some(item.clone());
    report.extractive = Some(check_extractiveness(generated, source, gold).0);
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRatio {
    pub code: DiscrepancyCode,
    pub number: u8,
    pub count: usize,
    pub n: usize,
    pub ratio: f64,
}

impl CodeRatio {
    /// "29/81 (35.8%)"
    pub fn render(&self) -> String {
        format!("{}/{} ({:.1}%)", self.count, self.n, self.ratio * 100.0)
    }
}

/// Per-code counts over `n` items. Codes co-occur, so the ratios need not
/// sum to one.
pub fn aggregate_ratios<'a>(code_sets: impl IntoIterator<Item = &'a BTreeSet<DiscrepancyCode>>) -> Result<Vec<CodeRatio>, DiagnosticsError> {
    let mut counts = [0usize; 6];
    let mut n = 0;
    for set in code_sets {
        n += 1;
        for code in set {
            counts[code.number() as usize - 1] += 1;
        }
    }
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    Ok(DiscrepancyCode::ALL
        .iter()
        .zip(counts)
        .map(|(code, count)| CodeRatio {
            code: *code,
            number: code.number(),
            count,
            n,
            ratio: count as f64 / n as f64,
        })
        .collect())
}

pub fn aggregate_reports(reports: &[DiagnosisReport]) -> Result<Vec<CodeRatio>, DiagnosticsError> {
    aggregate_ratios(reports.iter().map(|r| &r.codes))
}

/// One side-by-side pair for human review. `human_codes` stays empty until a
/// reviewer fills it in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub item: Option<ItemRef>,
    pub input: String,
    pub gold: String,
    pub generated: String,
    pub auto_codes: BTreeSet<DiscrepancyCode>,
    #[serde(default)]
    pub human_codes: Option<BTreeSet<DiscrepancyCode>>,
}

impl ReviewEntry {
    pub fn new(input: &str, report: &DiagnosisReport) -> Self {
        Self {
            item: report.item.clone(),
            input: input.to_string(),
            gold: report.gold.clone(),
            generated: report.generated.clone(),
            auto_codes: report.codes.clone(),
            human_codes: None,
        }
    }

    /// Human label when present, automatic otherwise.
    pub fn effective_codes(&self) -> &BTreeSet<DiscrepancyCode> {
        self.human_codes.as_ref().unwrap_or(&self.auto_codes)
    }
}

/// Attach human labels, keyed by item, to review entries.
pub fn apply_overrides(entries: &mut [ReviewEntry], overrides: &[ReviewEntry]) -> usize {
    let by_item: BTreeMap<String, &ReviewEntry> = overrides
        .iter()
        .filter(|o| o.human_codes.is_some())
        .filter_map(|o| o.item.as_ref().map(|i| (format!("{i}|{}", o.generated), o)))
        .collect();
    let mut applied = 0;
    for e in entries.iter_mut() {
        let Some(item) = &e.item else { continue };
        if let Some(o) = by_item.get(&format!("{item}|{}", e.generated)) {
            e.human_codes = o.human_codes.clone();
            applied += 1;
        }
    }
    applied
}
