//! Processing-activity summarization harness.
//!
//! Turns annotated app-usage scenarios into controlled-language ground-truth
//! summaries, builds few-shot prompts around them, drives sweeps against a
//! chat-completion provider, and scores the generated summaries.
//!
//! Module map:
//!
//! - [`corpus`]: tokenizer, corpus file loading and validation, lints,
//!   dataset splits, inter-annotator agreement.
//! - [`gold`]: template construction, rendering and slot alignment.
//! - [`prompting`]: prompt templates, example selection, permutations, cost.
//! - [`llm`]: provider abstraction, retry, rate limiting, response cache, mocks.
//! - [`metrics`]: ROUGE-1/2/L/S, METEOR and BERTScore.
//! - [`experiments`]: shot sweeps, permutation sweeps, final evaluation, run ledger.
//! - [`stats`]: box-plot summaries, standard-error curves, shot selection.
//! - [`diagnostics`]: discrepancy coding and extractiveness checks.

pub mod corpus;
pub mod diagnostics;
pub mod experiments;
pub mod gold;
pub mod hashing;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod rng;
pub mod stats;

pub use corpus::{
    ActionAnnotation, Actor, ArgKind, ArgumentSpan, Category, Corpus, CorpusError, DatasetSplit,
    ItemRef, Scenario, Sentence, Token, TokenRange,
};
pub use gold::{GoldExample, RenderedSummary, SummaryTemplate};
pub use metrics::{MetricKind, MetricReport, ScoreTriple};



pub use prompting::{Example, ExampleSet, PromptSpec, PromptTemplate};
pub use experiments::{ShotSweepConfig, PermutationSweepConfig, FinalEvalConfig, RunSettings};
