//! Offline providers: gold echo, seeded gold corruption, scripted replies and
//! fault injection.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{CallContext, ChatProvider, ChatRequest, ProviderError, ProviderReply};
use crate::corpus::{TRIGGER_CLOSE, TRIGGER_OPEN};
use crate::gold::GoldExample;
use crate::hashing::json_hash;
use crate::rng::SeededRng;

/// Marked input sentence → gold summary.
#[derive(Debug, Clone, Default)]
pub struct GoldLookup {
    by_input: HashMap<String, String>,
}

impl GoldLookup {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            by_input: pairs.into_iter().collect(),
        }
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a GoldExample>) -> Self {
        Self::new(examples.into_iter().map(|e| (e.input.clone(), e.gold.clone())))
    }

    pub fn len(&self) -> usize {
        self.by_input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_input.is_empty()
    }

    /// The target sentence is the last line of the last message that carries
    /// a trigger marker; the known input is matched as a suffix of that line,
    /// so any label in front of it is ignored.
    pub fn find(&self, request: &ChatRequest) -> Result<(&str, &str), ProviderError> {
        let content = request.last_content();
        let line = content
            .lines()
            .rev()
            .find(|l| l.contains(TRIGGER_OPEN))
            .ok_or_else(|| ProviderError::UnknownInput("no marked sentence in request".into()))?
            .trim();
        line.char_indices()
            .find_map(|(i, _)| self.by_input.get_key_value(&line[i..]))
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .ok_or_else(|| ProviderError::UnknownInput(line.to_string()))
    }
}

pub struct EchoGold {
    lookup: GoldLookup,
}

impl EchoGold {
    pub fn new(lookup: GoldLookup) -> Self {
        Self { lookup }
    }
}

impl ChatProvider for EchoGold {
    fn id(&self) -> String {
        "echo_gold".into()
    }

    fn send(&self, request: &ChatRequest, _ctx: &CallContext) -> Result<ProviderReply, ProviderError> {
        self.lookup.find(request).map(|(_, gold)| ProviderReply::text(gold))
    }
}

/// Gold summaries with seeded token noise. Each gold token is, with
/// probability `p`, either deleted or followed by a random token of the input
/// sentence (a fair coin picks which, unless `deletion_only`). The noise
/// stream is derived from the seed, the request and the repetition index.
pub struct CorruptGold {
    lookup: GoldLookup,
    pub p: f64,
    pub seed: u64,
    pub deletion_only: bool,
}

impl CorruptGold {
    pub fn new(lookup: GoldLookup, p: f64, seed: u64) -> Self {
        Self {
            lookup,
            p,
            seed,
            deletion_only: false,
        }
    }

    pub fn deletion_only(mut self) -> Self {
        self.deletion_only = true;
        self
    }

    fn corrupt(&self, input: &str, gold: &str, rng: &mut SeededRng) -> String {
        let source: Vec<&str> = input
            .split_whitespace()
            .filter(|t| *t != TRIGGER_OPEN && *t != TRIGGER_CLOSE)
            .collect();
        let mut out: Vec<&str> = Vec::new();
        for token in gold.split_whitespace() {
            if rng.unit() >= self.p {
                out.push(token);
                continue;
            }
            let delete = self.deletion_only || rng.unit() < 0.5;
            if !delete {
                out.push(token);
                if !source.is_empty() {
                    out.push(source[rng.below(source.len() as u64) as usize]);
                }
            }
        }
        out.join(" ")
    }
}

impl ChatProvider for CorruptGold {
    fn id(&self) -> String {
        format!(
            "corrupt_gold:p={}:seed={}{}",
            self.p,
            self.seed,
            if self.deletion_only { ":deletion_only" } else { "" }
        )
    }

    fn send(&self, request: &ChatRequest, ctx: &CallContext) -> Result<ProviderReply, ProviderError> {
        let (input, gold) = self.lookup.find(request)?;
        if self.p <= 0.0 {
            return Ok(ProviderReply::text(gold));
        }
        let purpose = format!("corrupt/{}/{}", json_hash(&request.body()), ctx.repetition_index);
        let mut rng = SeededRng::for_purpose(self.seed, &purpose);
        Ok(ProviderReply::text(self.corrupt(input, gold, &mut rng)))
    }
}

/// Replays a fixed list of outcomes in order, one per call. With
/// [`repeating`](Self::repeating) the same text is returned forever.
pub struct ScriptedProvider {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    fallback: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(script: Vec<Result<String, ProviderError>>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            fallback: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn repeating(text: &str) -> Self {
        Self {
            script: Mutex::new(VecDeque::new()),
            fallback: Some(text.to_string()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for ScriptedProvider {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn send(&self, _request: &ChatRequest, _ctx: &CallContext) -> Result<ProviderReply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match self.script.lock().expect("script lock").pop_front() {
            Some(outcome) => outcome.map(ProviderReply::text),
            None => self
                .fallback
                .clone()
                .map(ProviderReply::text)
                .ok_or_else(|| ProviderError::Malformed("script exhausted".into())),
        }
    }
}

/// Wraps a provider; panics on requests whose target sentence contains
/// `needle`, or fails with `error` after `fail_after` successful calls.
pub struct FaultInjector {
    inner: Arc<dyn ChatProvider>,
    panic_on: Option<String>,
    fail_after: Option<(usize, ProviderError)>,
    calls: AtomicUsize,
}

impl FaultInjector {
    pub fn new(inner: Arc<dyn ChatProvider>) -> Self {
        Self {
            inner,
            panic_on: None,
            fail_after: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn panic_on(mut self, needle: &str) -> Self {
        self.panic_on = Some(needle.to_string());
        self
    }

    pub fn fail_after(mut self, calls: usize, error: ProviderError) -> Self {
        self.fail_after = Some((calls, error));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for FaultInjector {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn send(&self, request: &ChatRequest, ctx: &CallContext) -> Result<ProviderReply, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some((limit, error)) = &self.fail_after {
            if n >= *limit {
                return Err(error.clone());
            }
        }
        if let Some(needle) = &self.panic_on {
            let target = request.last_content().lines().rev().find(|l| l.contains(TRIGGER_OPEN));
            if target.is_some_and(|l| l.contains(needle.as_str())) {
                panic!("injected fault");
            }
        }
        self.inner.send(request, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INPUT: &str = "If I opt in , I would probably be able to ⟨tgr⟩ get ⟨/tgr⟩ regular promotions offered to me .";

    fn lookup() -> GoldLookup {
        GoldLookup::new([(INPUT.to_string(), "User gets promotions".to_string())])
    }

    fn prompt(target: &str) -> ChatRequest {
        ChatRequest::user(
            "m",
            &format!("Instruction: ...\n\nExample 1\nInput: I ⟨tgr⟩ do ⟨/tgr⟩ x\nOutput: User does x\n\nInput: {target}\nOutput:"),
        )
    }

    #[test]
    fn echo_returns_gold() {
        let p = EchoGold::new(lookup());
        let r = p.send(&prompt(INPUT), &CallContext::default()).unwrap();
        assert_eq!(r.text, "User gets promotions");
        assert!(matches!(
            p.send(&prompt("I ⟨tgr⟩ eat ⟨/tgr⟩ ."), &CallContext::default()),
            Err(ProviderError::UnknownInput(_))
        ));
        assert!(matches!(
            p.send(&ChatRequest::user("m", "plain"), &CallContext::default()),
            Err(ProviderError::UnknownInput(_))
        ));
    }

    #[test]
    fn zero_noise_is_echo() {
        let p = CorruptGold::new(lookup(), 0.0, 4);
        for r in 0..5 {
            let ctx = CallContext {
                repetition_index: r,
                attempt: 0,
            };
            assert_eq!(p.send(&prompt(INPUT), &ctx).unwrap().text, "User gets promotions");
        }
    }

    #[test]
    fn full_deletion_is_empty() {
        let p = CorruptGold::new(lookup(), 1.0, 4).deletion_only();
        assert_eq!(p.send(&prompt(INPUT), &CallContext::default()).unwrap().text, "");
    }

    #[test]
    fn noise_is_seeded_and_per_repetition() {
        let p = CorruptGold::new(lookup(), 0.5, 11);
        let ctx = |r| CallContext {
            repetition_index: r,
            attempt: 0,
        };
        let a = p.send(&prompt(INPUT), &ctx(0)).unwrap().text;
        assert_eq!(a, p.send(&prompt(INPUT), &ctx(0)).unwrap().text);
        let variants: std::collections::BTreeSet<String> =
            (0..20).map(|r| p.send(&prompt(INPUT), &ctx(r)).unwrap().text).collect();
        assert!(variants.len() > 1);
        let source: Vec<&str> = INPUT.split_whitespace().collect();
        for v in &variants {
            for t in v.split_whitespace() {
                assert!(source.contains(&t) || ["User", "gets"].contains(&t), "{t}");
            }
        }
    }

    #[test]
    fn injector_panics_on_needle() {
        let inner: Arc<dyn ChatProvider> = Arc::new(EchoGold::new(lookup()));
        let p = FaultInjector::new(inner).panic_on("promotions");
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            p.send(&prompt(INPUT), &CallContext::default())
        }));
        assert!(r.is_err());
    }
}
