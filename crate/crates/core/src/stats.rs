//! Descriptive statistics and the standard-error shot-selection rule.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("no values")]
    Empty,
    #[error("ragged matrix: row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("need at least {required} repetitions, got {got}")]
    TooFewRepetitions { required: usize, got: usize },
    #[error("threshold must be positive, got {0}")]
    BadThreshold(String),
}

/// Quartiles use linear interpolation between order statistics at
/// `h = (n - 1) p` (the inclusive method). Variance uses `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, variance) = mean_variance(&sorted);
    Ok(BoxplotSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean,
        variance,
        n: sorted.len(),
    })
}

/// Linear-interpolation quantile of sorted, non-empty data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and sample variance (0 for a single value). Values are summed in the
/// given order.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Running count/mean/variance/min/max in O(1) memory (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamingStats {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for StreamingStats {
    fn default() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl StreamingStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeCurvePoint {
    pub shots: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub n: usize,
}

/// How repetition means are pooled at each shot count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingMode {
    /// Shot `s` pools every repetition mean of shots `0..=s`.
    #[default]
    Cumulative,
    /// Shot `s` uses only its own repetition means.
    WithinShot,
}

/// Standard-error curve over a `[shot][repetition]` matrix of repetition means.
pub fn se_curve(rep_means: &[Vec<f64>]) -> Result<Vec<SeCurvePoint>, StatsError> {
    se_curve_with(rep_means, PoolingMode::Cumulative)
}

pub fn se_curve_with(rep_means: &[Vec<f64>], mode: PoolingMode) -> Result<Vec<SeCurvePoint>, StatsError> {
    let Some(first) = rep_means.first() else {
        return Err(StatsError::Empty);
    };
    let reps = first.len();
    if reps < 2 {
        return Err(StatsError::TooFewRepetitions { required: 2, got: reps });
    }
    if let Some((row, r)) = rep_means.iter().enumerate().find(|(_, r)| r.len() != reps) {
        return Err(StatsError::Ragged {
            row,
            got: r.len(),
            expected: reps,
        });
    }
    let mut pooled: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(rep_means.len());
    for (shots, row) in rep_means.iter().enumerate() {
        let data: &[f64] = match mode {
            PoolingMode::Cumulative => {
                pooled.extend_from_slice(row);
                &pooled
            }
            PoolingMode::WithinShot => row,
        };
        let (mean, var) = mean_variance(data);
        out.push(SeCurvePoint {
            shots,
            mean,
            standard_error: var.sqrt() / (data.len() as f64).sqrt(),
            n: data.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotSelection {
    pub shots: usize,
    pub threshold: f64,
    pub threshold_met: bool,
}

pub const DEFAULT_SE_THRESHOLD: f64 = 0.05;

/// Smallest shot count whose standard error is at or below `threshold`;
/// the largest shot count, flagged unmet, when none qualifies.
pub fn select_shot_count(curve: &[SeCurvePoint], threshold: f64) -> Result<ShotSelection, StatsError> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(StatsError::BadThreshold(threshold.to_string()));
    }
    let last = curve.last().ok_or(StatsError::Empty)?;
    Ok(match curve.iter().find(|p| p.standard_error <= threshold) {
        Some(p) => ShotSelection {
            shots: p.shots,
            threshold,
            threshold_met: true,
        },
        None => ShotSelection {
            shots: last.shots,
            threshold,
            threshold_met: false,
        },
    })
}
