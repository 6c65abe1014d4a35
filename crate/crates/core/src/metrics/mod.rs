//! Reference/candidate similarity metrics.
//!
//! Every metric works on normalized tokens: lowercase, trigger markers
//! stripped, tokenized with the corpus tokenizer, punctuation dropped.

mod bertscore;
mod meteor;
mod rouge;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::corpus::normalize_tokens as normalize_text;
pub use bertscore::{bert_score, bert_score_tokens, cosine, EmbeddingProvider, HashEmbedder};
pub use meteor::{align_stage, meteor, meteor_tokens, stem, Alignment, MeteorScore};
pub use rouge::{lcs_len, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens, rouge_s, rouge_s_tokens};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding provider returned {got} vectors for {expected} tokens")]
    LengthMismatch { expected: usize, got: usize },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub const ZERO: ScoreTriple = ScoreTriple {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Harmonic mean F1 (0 when both are 0).
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    /// P = overlap/candidate, R = overlap/reference, zero when a count is zero.
    pub fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        if overlap == 0 || candidate == 0 || reference == 0 {
            return Self::ZERO;
        }
        Self::from_pr(overlap as f64 / candidate as f64, overlap as f64 / reference as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "rougeS")]
    RougeS,
    #[serde(rename = "meteor")]
    Meteor,
    #[serde(rename = "bertscore")]
    BertScore,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Rouge1,
        MetricKind::Rouge2,
        MetricKind::RougeL,
        MetricKind::RougeS,
        MetricKind::Meteor,
        MetricKind::BertScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Rouge1 => "rouge1",
            MetricKind::Rouge2 => "rouge2",
            MetricKind::RougeL => "rougeL",
            MetricKind::RougeS => "rougeS",
            MetricKind::Meteor => "meteor",
            MetricKind::BertScore => "bertscore",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// Scores for one (reference, candidate) pair. For METEOR the `f1` slot holds
/// the METEOR score and P/R are its unigram precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: ScoreTriple,
    pub rouge2: ScoreTriple,
    #[serde(rename = "rougeL")]
    pub rouge_l: ScoreTriple,
    #[serde(rename = "rougeS")]
    pub rouge_s: ScoreTriple,
    pub meteor: ScoreTriple,
    pub bertscore: ScoreTriple,
}

impl MetricReport {
    pub const ZERO: MetricReport = MetricReport {
        rouge1: ScoreTriple::ZERO,
        rouge2: ScoreTriple::ZERO,
        rouge_l: ScoreTriple::ZERO,
        rouge_s: ScoreTriple::ZERO,
        meteor: ScoreTriple::ZERO,
        bertscore: ScoreTriple::ZERO,
    };

    pub fn get(&self, kind: MetricKind) -> ScoreTriple {
        match kind {
            MetricKind::Rouge1 => self.rouge1,
            MetricKind::Rouge2 => self.rouge2,
            MetricKind::RougeL => self.rouge_l,
            MetricKind::RougeS => self.rouge_s,
            MetricKind::Meteor => self.meteor,
            MetricKind::BertScore => self.bertscore,
        }
    }

    pub fn f1(&self, kind: MetricKind) -> f64 {
        self.get(kind).f1
    }
}

/// Per-metric mean F1 over a set of reports, summed in the given order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    #[serde(rename = "rougeS")]
    pub rouge_s: f64,
    pub meteor: f64,
    pub bertscore: f64,
}

impl MetricMeans {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> Self {
        let mut sums = [0.0f64; 6];
        let mut n = 0usize;
        for r in reports {
            for (s, kind) in sums.iter_mut().zip(MetricKind::ALL) {
                *s += r.f1(kind);
            }
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        let m = sums.map(|s| s / n as f64);
        Self {
            rouge1: m[0],
            rouge2: m[1],
            rouge_l: m[2],
            rouge_s: m[3],
            meteor: m[4],
            bertscore: m[5],
        }
    }

    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Rouge1 => self.rouge1,
            MetricKind::Rouge2 => self.rouge2,
            MetricKind::RougeL => self.rouge_l,
            MetricKind::RougeS => self.rouge_s,
            MetricKind::Meteor => self.meteor,
            MetricKind::BertScore => self.bertscore,
        }
    }
}

/// All six metrics for one pair. Only BERTScore can fail.
pub fn evaluate_pair(
    reference: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<MetricReport, MetricsError> {
    let r = normalize_text(reference);
    let c = normalize_text(candidate);
    evaluate_tokens(&r, &c, provider)
}

pub fn evaluate_tokens(
    reference: &[String],
    candidate: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<MetricReport, MetricsError> {
    let m = meteor_tokens(reference, candidate);
    Ok(MetricReport {
        rouge1: rouge_n_tokens(reference, candidate, 1),
        rouge2: rouge_n_tokens(reference, candidate, 2),
        rouge_l: rouge_l_tokens(reference, candidate),
        rouge_s: rouge_s_tokens(reference, candidate, None),
        meteor: ScoreTriple {
            precision: m.precision,
            recall: m.recall,
            f1: m.score,
        },
        bertscore: bert_score_tokens(reference, candidate, provider)?,
    })
}
