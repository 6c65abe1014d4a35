//! Greedy-matching BERTScore over injected token embeddings.

use super::{normalize_text, MetricsError, ScoreTriple};
use crate::hashing::sha256_hex;
use crate::rng::SeededRng;

/// Source of fixed-dimension token vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> String;

    fn dimension(&self) -> usize;

    /// One vector per input token.
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError>;
}

/// Deterministic pseudo-random vector per token string. Identical tokens get
/// identical vectors and distinct tokens get nearly orthogonal ones, but
/// there is no semantic signal: for tests and offline plumbing only.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dimension: 256,
            seed: 0,
        }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-{}-{}", self.dimension, self.seed)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError> {
        Ok(tokens
            .iter()
            .map(|t| {
                let digest = sha256_hex(t.as_bytes());
                let word_seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
                let mut rng = SeededRng::new(word_seed ^ self.seed);
                (0..self.dimension).map(|_| rng.unit() * 2.0 - 1.0).collect()
            })
            .collect())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn bert_score(
    reference: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoreTriple, MetricsError> {
    bert_score_tokens(&normalize_text(reference), &normalize_text(candidate), provider)
}

/// Recall averages, over reference tokens, the best cosine to any candidate
/// token; precision is the mirror image. Best matches below zero count as
/// zero so scores stay in [0, 1].
pub fn bert_score_tokens(
    reference: &[String],
    candidate: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<ScoreTriple, MetricsError> {
    if reference.is_empty() || candidate.is_empty() {
        return Ok(ScoreTriple::ZERO);
    }
    let r = checked_embed(provider, reference)?;
    let c = checked_embed(provider, candidate)?;
    let sim: Vec<Vec<f64>> = r.iter().map(|rv| c.iter().map(|cv| cosine(rv, cv)).collect()).collect();

    let recall = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0))
        .sum::<f64>()
        / r.len() as f64;
    let precision = (0..c.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max).max(0.0))
        .sum::<f64>()
        / c.len() as f64;
    Ok(ScoreTriple::from_pr(precision.min(1.0), recall.min(1.0)))
}

fn checked_embed(provider: &dyn EmbeddingProvider, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricsError> {
    let vectors = provider.embed(tokens)?;
    if vectors.len() != tokens.len() {
        return Err(MetricsError::LengthMismatch {
            expected: tokens.len(),
            got: vectors.len(),
        });
    }
    let dim = provider.dimension();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(MetricsError::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    Ok(vectors)
}
