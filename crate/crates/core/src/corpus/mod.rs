//! Annotated scenario corpora.
//!
//! A corpus file holds user-written usage scenarios, already split into
//! sentences and tokens, plus action-verb annotations that index into those
//! tokens. Loading validates every reference, so downstream code can index
//! without re-checking.

mod kappa;
mod lint;
mod load;
mod split;
pub mod synthetic;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use kappa::{annotation_to_token_labels, annotator_ids, cohen_kappa, corpus_kappa, pooled_kappa, TokenLabel};
pub use lint::{lint_corpus, LintFinding, LintRule};
pub use load::{load_corpus, parse_corpus, RawAnnotation, RawArgument, RawCorpus, RawRecord, RawScenario, RawSentence};
pub use split::{split_dataset, split_items, split_sizes, DatasetSplit};
pub use tokenize::{
    detokenize, is_punctuation_token, is_split_punct, normalize_tokens, tokenize, tokenize_strs, TRIGGER_CLOSE,
    TRIGGER_OPEN,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("dangling reference at {pointer}: {detail}")]
    DanglingReference { pointer: String, detail: String },
    #[error("out-of-range span at {pointer}: {detail}")]
    OutOfRange { pointer: String, detail: String },
    #[error("invalid corpus at {pointer}: {detail}")]
    Invalid { pointer: String, detail: String },
    #[error("category {category} has {available} items, need at least {required}")]
    TooFewItems {
        category: Category,
        available: usize,
        required: usize,
    },
    #[error("label sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("label sequences are empty")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub scenario_id: String,
    pub sentence_index: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Surface text of an inclusive token range. Caller guarantees validity.
    pub fn surface(&self, range: TokenRange) -> String {
        detokenize(&self.texts()[range.start..=range.end])
    }

    pub fn text(&self) -> String {
        detokenize(&self.texts())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub id: String,
    pub app_name: Option<String>,
    pub raw_text: String,
    pub sentences: Vec<Sentence>,
}

impl Scenario {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Inclusive token range `[start, end]` within one sentence. Serialized as a
/// two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct TokenRange {
    pub start: usize,
    pub end: usize,
}

impl TokenRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn single(at: usize) -> Self {
        Self { start: at, end: at }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &TokenRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn fits(&self, sentence_len: usize) -> bool {
        self.start <= self.end && self.end < sentence_len
    }
}

impl From<[usize; 2]> for TokenRange {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<TokenRange> for [usize; 2] {
    fn from(r: TokenRange) -> Self {
        [r.start, r.end]
    }
}

impl fmt::Display for TokenRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    DataType,
    Purpose,
    ExternalEntity,
    UiComponent,
}

impl fmt::Display for ArgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArgKind::DataType => "DataType",
            ArgKind::Purpose => "Purpose",
            ArgKind::ExternalEntity => "ExternalEntity",
            ArgKind::UiComponent => "UIComponent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgumentSpan {
    pub kind: ArgKind,
    pub range: TokenRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Goal,
    Step,
    Dp,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Goal, Category::Step, Category::Dp];

    pub fn slug(self) -> &'static str {
        match self {
            Category::Goal => "goal",
            Category::Step => "step",
            Category::Dp => "dp",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Goal => "Goal",
            Category::Step => "Step",
            Category::Dp => "DP",
        })
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "goal" => Ok(Category::Goal),
            "step" => Ok(Category::Step),
            "dp" => Ok(Category::Dp),
            other => Err(format!("unknown category {other:?} (expected goal, step or dp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    User,
    App,
    External,
}

/// Identity of one annotated action: the sentence plus the verb's span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemRef {
    pub scenario_id: String,
    pub sentence_index: usize,
    pub verb_range: TokenRange,
}

impl fmt::Display for ItemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}@{}", self.scenario_id, self.sentence_index, self.verb_range)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionAnnotation {
    pub scenario_id: String,
    pub sentence_index: usize,
    pub verb_range: TokenRange,
    pub verb_lemma: String,
    pub category: Category,
    pub actor: Actor,
    pub actor_name: Option<String>,
    pub arguments: Vec<ArgumentSpan>,
}

impl ActionAnnotation {
    pub fn item_ref(&self) -> ItemRef {
        ItemRef {
            scenario_id: self.scenario_id.clone(),
            sentence_index: self.sentence_index,
            verb_range: self.verb_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatorRecord {
    pub annotator_id: String,
    pub scenario_id: String,
    pub annotations: Vec<ActionAnnotation>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub scenarios: Vec<Scenario>,
    pub gold_annotations: Vec<ActionAnnotation>,
    pub annotator_records: Vec<AnnotatorRecord>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Assemble a corpus from already-validated parts.
    pub fn from_parts(
        scenarios: Vec<Scenario>,
        gold_annotations: Vec<ActionAnnotation>,
        annotator_records: Vec<AnnotatorRecord>,
    ) -> Self {
        let by_id = scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Self {
            scenarios,
            gold_annotations,
            annotator_records,
            by_id,
        }
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.by_id.get(id).map(|&i| &self.scenarios[i])
    }

    pub fn sentence(&self, scenario_id: &str, sentence_index: usize) -> Option<&Sentence> {
        self.scenario(scenario_id)
            .and_then(|s| s.sentences.get(sentence_index))
    }

    pub fn sentence_of(&self, annotation: &ActionAnnotation) -> Option<&Sentence> {
        self.sentence(&annotation.scenario_id, annotation.sentence_index)
    }

    /// Gold annotation count per category; every category is present.
    pub fn census(&self) -> BTreeMap<Category, usize> {
        let mut census: BTreeMap<Category, usize> =
            Category::ALL.iter().map(|c| (*c, 0)).collect();
        for a in &self.gold_annotations {
            *census.entry(a.category).or_default() += 1;
        }
        census
    }

    pub fn annotations_of(&self, category: Category) -> Vec<&ActionAnnotation> {
        self.gold_annotations
            .iter()
            .filter(|a| a.category == category)
            .collect()
    }

    pub fn annotation(&self, item: &ItemRef) -> Option<&ActionAnnotation> {
        self.gold_annotations.iter().find(|a| {
            a.scenario_id == item.scenario_id
                && a.sentence_index == item.sentence_index
                && a.verb_range == item.verb_range
        })
    }
}

/// Lowercased verb lemmas of every gold annotation.
pub fn build_verb_lexicon(corpus: &Corpus) -> BTreeSet<String> {
    corpus
        .gold_annotations
        .iter()
        .map(|a| a.verb_lemma.to_lowercase())
        .collect()
}

/// Fallback lemma for annotations stored without one: the surface verb,
/// lowercased, with a plural/3sg suffix removed from its first word.
pub fn fallback_lemma(surface: &str) -> String {
    let lower = surface.to_lowercase();
    let mut words = lower.split_whitespace();
    let Some(head) = words.next() else {
        return lower;
    };
    let head = if let Some(stem) = head.strip_suffix("ies").filter(|s| s.len() > 1) {
        format!("{stem}y")
    } else if ["sses", "shes", "ches", "xes", "zes"].iter().any(|s| head.ends_with(s)) {
        head[..head.len() - 2].to_string()
    } else if head.len() > 2 && head.ends_with('s') && !head.ends_with("ss") {
        head[..head.len() - 1].to_string()
    } else {
        head.to_string()
    };
    std::iter::once(head.as_str())
        .chain(words)
        .collect::<Vec<_>>()
        .join(" ")
}
