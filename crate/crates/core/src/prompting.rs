//! Few-shot prompt construction, example selection and order permutations.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, TRIGGER_CLOSE, TRIGGER_OPEN};
use crate::gold::GoldExample;
use crate::hashing::json_hash;
use crate::rng::SeededRng;

/// Size of the fixed candidate pool drawn from the training split.
pub const EXAMPLE_POOL_SIZE: usize = 10;

/// Largest example count whose orderings can be ranked in a `u64`.
pub const MAX_PERMUTABLE: usize = 20;

const DEFAULT_TEMPLATE: &str = include_str!("../templates/default_prompt.json");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("template constraint does not restrict the output to input tokens")]
    MissingConstraint,
    #[error("requested {requested} examples but the training split has {available}")]
    NotEnoughExamples { requested: usize, available: usize },
    #[error("example input must contain exactly one trigger region: {0}")]
    BadMarkedInput(String),
    #[error("target input is also an example input")]
    TargetAmongExamples,
    #[error("cannot permute {0} examples (supported: 1..={MAX_PERMUTABLE})")]
    PermutationSize(usize),
    #[error("price must be a non-negative number, got {0}")]
    NegativeRate(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub persona: String,
    pub task_instruction: String,
    pub constraint: String,
    pub example_header: String,
    pub input_label: String,
    pub output_label: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TEMPLATE).expect("bundled template parses")
    }
}

impl PromptTemplate {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let template: Self = serde_json::from_str(text)?;
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let fields = [
            ("persona", &self.persona),
            ("task_instruction", &self.task_instruction),
            ("constraint", &self.constraint),
            ("example_header", &self.example_header),
            ("input_label", &self.input_label),
            ("output_label", &self.output_label),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(PromptError::EmptyField(name));
        }
        let c = self.constraint.to_lowercase();
        if !(c.contains("token") || c.contains("word")) || !c.contains("input") {
            return Err(PromptError::MissingConstraint);
        }
        Ok(())
    }

    /// Content hash recorded with every experiment run.
    pub fn hash(&self) -> String {
        json_hash(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSet {
    pub examples: Vec<Example>,
    pub source_seed: u64,
}

impl ExampleSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The first `k` examples, keeping the source seed.
    pub fn prefix(&self, k: usize) -> ExampleSet {
        ExampleSet {
            examples: self.examples[..k.min(self.len())].to_vec(),
            source_seed: self.source_seed,
        }
    }

    /// Examples rearranged so that position `i` holds `self.examples[ordering[i]]`.
    pub fn reordered(&self, ordering: &[usize]) -> ExampleSet {
        ExampleSet {
            examples: ordering.iter().map(|&i| self.examples[i].clone()).collect(),
            source_seed: self.source_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub template: PromptTemplate,
    pub examples: ExampleSet,
    pub target_input: String,
}

impl PromptSpec {
    pub fn new(template: PromptTemplate, examples: ExampleSet, target_input: &str) -> Result<Self, PromptError> {
        template.validate()?;
        for e in &examples.examples {
            check_marked(&e.input)?;
        }
        check_marked(target_input)?;
        if examples.examples.iter().any(|e| e.input == target_input) {
            return Err(PromptError::TargetAmongExamples);
        }
        Ok(Self {
            template,
            examples,
            target_input: target_input.to_string(),
        })
    }
}

fn check_marked(input: &str) -> Result<(), PromptError> {
    let open = input.matches(TRIGGER_OPEN).count();
    let close = input.matches(TRIGGER_CLOSE).count();
    let ordered = match (input.find(TRIGGER_OPEN), input.find(TRIGGER_CLOSE)) {
        (Some(o), Some(c)) => o < c,
        _ => false,
    };
    if open == 1 && close == 1 && ordered {
        Ok(())
    } else {
        Err(PromptError::BadMarkedInput(input.to_string()))
    }
}

/// Shuffle the training split once under the seed and take the first `k`
/// items. The first [`EXAMPLE_POOL_SIZE`] items of that shuffle form the fixed
/// pool, so every `k`-shot set is a prefix of every larger one.
pub fn select_examples(split: &DatasetSplit<GoldExample>, k: usize, seed: u64) -> Result<ExampleSet, PromptError> {
    if k > split.train.len() {
        return Err(PromptError::NotEnoughExamples {
            requested: k,
            available: split.train.len(),
        });
    }
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    SeededRng::for_purpose(seed, &format!("examples/{}", split.category.slug())).shuffle(&mut order);
    Ok(ExampleSet {
        examples: order[..k]
            .iter()
            .map(|&i| Example {
                input: split.train[i].input.clone(),
                output: split.train[i].gold.clone(),
            })
            .collect(),
        source_seed: seed,
    })
}

/// Render the prompt text. Sections are separated by a blank line: persona,
/// task instruction, constraint, one block per example, then the excerpt with
/// the target input and an empty output label.
pub fn build_prompt(spec: &PromptSpec) -> String {
    let t = &spec.template;
    let mut sections = vec![t.persona.clone(), t.task_instruction.clone(), t.constraint.clone()];
    for (i, e) in spec.examples.examples.iter().enumerate() {
        sections.push(format!(
            "{} {}\n{} {}\n{} {}",
            t.example_header,
            i + 1,
            t.input_label,
            e.input,
            t.output_label,
            e.output
        ));
    }
    sections.push(format!("{} {}\n{}", t.input_label, spec.target_input, t.output_label));
    sections.join("\n\n")
}

/// Number of example blocks in a prompt built from `template`.
pub fn count_example_blocks(prompt: &str, template: &PromptTemplate) -> usize {
    prompt
        .split("\n\n")
        .filter(|section| {
            section
                .strip_prefix(&template.example_header)
                .and_then(|rest| rest.strip_prefix(' '))
                .and_then(|rest| rest.split('\n').next())
                .is_some_and(|n| n.parse::<usize>().is_ok())
        })
        .count()
}

pub fn factorial(k: usize) -> Option<u64> {
    (1..=k as u64).try_fold(1u64, |acc, x| acc.checked_mul(x))
}

/// Ordering with lexicographic rank `rank` among the permutations of `0..k`.
pub fn unrank_permutation(k: usize, mut rank: u64) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(k);
    for remaining in (1..=k).rev() {
        let block = factorial(remaining - 1).expect("k within range");
        let i = (rank / block) as usize;
        rank %= block;
        out.push(pool.remove(i));
    }
    out
}

pub fn rank_permutation(ordering: &[usize]) -> u64 {
    let k = ordering.len();
    let mut rank = 0u64;
    for i in 0..k {
        let smaller_after = ordering[i + 1..].iter().filter(|&&x| x < ordering[i]).count() as u64;
        rank += smaller_after * factorial(k - 1 - i).expect("k within range");
    }
    rank
}

/// Advance to the next ordering in lexicographic order; false at the last one.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    /// Lexicographic rank of the ordering.
    pub index: u64,
    pub ordering: Vec<usize>,
}

/// Stream of orderings of `0..k`.
#[derive(Debug, Clone)]
pub enum Permutations {
    Full { next: Option<Vec<usize>>, index: u64 },
    Sampled { ranks: std::vec::IntoIter<u64>, k: usize },
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        match self {
            Permutations::Full { next, index } => {
                let current = next.take()?;
                let mut successor = current.clone();
                if next_permutation(&mut successor) {
                    *next = Some(successor);
                }
                let item = Permutation {
                    index: *index,
                    ordering: current,
                };
                *index += 1;
                Some(item)
            }
            Permutations::Sampled { ranks, k } => ranks.next().map(|r| Permutation {
                index: r,
                ordering: unrank_permutation(*k, r),
            }),
        }
    }
}

/// Orderings of `k` examples. Without a limit, all `k!` orderings in
/// lexicographic order. With limit `L < k!`, `L` distinct orderings drawn
/// uniformly without replacement under `sample_seed`, yielded in rank order.
pub fn enumerate_permutations(k: usize, limit: Option<u64>, sample_seed: u64) -> Result<Permutations, PromptError> {
    if k == 0 || k > MAX_PERMUTABLE {
        return Err(PromptError::PermutationSize(k));
    }
    let total = factorial(k).expect("k <= 20");
    match limit {
        Some(l) if l < total => {
            let mut rng = SeededRng::for_purpose(sample_seed, &format!("permutations/{k}"));
            let mut seen = HashSet::with_capacity(l as usize);
            let mut ranks = Vec::with_capacity(l as usize);
            while (ranks.len() as u64) < l {
                let r = rng.below(total);
                if seen.insert(r) {
                    ranks.push(r);
                }
            }
            ranks.sort_unstable();
            Ok(Permutations::Sampled {
                ranks: ranks.into_iter(),
                k,
            })
        }
        _ => Ok(Permutations::Full {
            next: Some((0..k).collect()),
            index: 0,
        }),
    }
}

/// One prompt whose cost is being estimated, sent `calls` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedPrompt {
    pub dataset: String,
    pub prompt: String,
    pub calls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetCost {
    pub calls: u64,
    pub units: u64,
    pub cost: f64,
}

/// Rough spend estimate. Units are approximated as one per four characters of
/// prompt (rounded up) plus the configured output allowance per call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub per_dataset: BTreeMap<String, DatasetCost>,
    pub total_units: u64,
    pub total_cost: f64,
}

pub fn prompt_units(prompt: &str) -> u64 {
    (prompt.chars().count() as u64).div_ceil(4)
}

pub fn estimate_sweep_cost(
    prompts: &[PlannedPrompt],
    max_output_units: u64,
    price_per_1k_units: f64,
) -> Result<CostEstimate, PromptError> {
    if price_per_1k_units.is_nan() || price_per_1k_units < 0.0 {
        return Err(PromptError::NegativeRate(price_per_1k_units));
    }
    let mut estimate = CostEstimate::default();
    for p in prompts {
        let units = (prompt_units(&p.prompt) + max_output_units) * p.calls;
        let entry = estimate.per_dataset.entry(p.dataset.clone()).or_default();
        entry.calls += p.calls;
        entry.units += units;
        estimate.total_units += units;
    }
    for d in estimate.per_dataset.values_mut() {
        d.cost = d.units as f64 * price_per_1k_units / 1000.0;
    }
    estimate.total_cost = estimate.total_units as f64 * price_per_1k_units / 1000.0;
    Ok(estimate)
}
