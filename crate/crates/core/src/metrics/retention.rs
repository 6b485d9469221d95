use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Scores of one task before and after compression, on a 0-100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: String,
    pub original: f64,
    pub compressed: f64,
    #[serde(default)]
    pub original_stderr: f64,
    #[serde(default)]
    pub compressed_stderr: f64,
}

impl TaskScore {
    pub fn new(task: impl Into<String>, original: f64, compressed: f64) -> Self {
        Self {
            task: task.into(),
            original,
            compressed,
            original_stderr: 0.0,
            compressed_stderr: 0.0,
        }
    }

    pub fn with_stderr(mut self, original: f64, compressed: f64) -> Self {
        self.original_stderr = original;
        self.compressed_stderr = compressed;
        self
    }
}

/// `compressed / original`. Values above 1 are kept.
pub fn retention_rate(score: &TaskScore) -> Result<f64, MetricsError> {
    if !(score.original > 0.0) {
        return Err(MetricsError::UndefinedRetention {
            task: score.task.clone(),
            original: score.original,
        });
    }
    Ok(score.compressed / score.original)
}

/// Retention with first-order propagated standard error
/// `σ_R = R·sqrt((σ_c/P_c)² + (σ_o/P_o)²)`, evaluated in the equivalent form
/// `sqrt(σ_c² + R²σ_o²) / P_o` so that a zero compressed score stays finite.
pub fn retention_with_stderr(score: &TaskScore) -> Result<(f64, f64), MetricsError> {
    let r = retention_rate(score)?;
    let sigma = (score.compressed_stderr.powi(2) + (r * score.original_stderr).powi(2)).sqrt()
        / score.original;
    Ok((r, sigma))
}

/// Mean of per-task retention ratios.
pub fn semantic_retention_sr1(scores: &[TaskScore]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyScores);
    }
    let sum = scores.iter().map(retention_rate).sum::<Result<f64, _>>()?;
    Ok(sum / scores.len() as f64)
}

/// Ratio of summed compressed scores to summed original scores.
pub fn semantic_retention_sr2(scores: &[TaskScore]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyScores);
    }
    let original: f64 = scores.iter().map(|s| s.original).sum();
    let compressed: f64 = scores.iter().map(|s| s.compressed).sum();
    if !(original > 0.0) {
        return Err(MetricsError::UndefinedRetention {
            task: "<sum>".into(),
            original,
        });
    }
    Ok(compressed / original)
}
