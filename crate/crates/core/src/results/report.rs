use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use super::dataset::{base_model, task_order, ScoreDataset, ScoreRecord, MEAN_TASK};
use super::ResultsError;
use crate::metrics::{
    retention_with_stderr, semantic_retention_sr1, semantic_retention_sr2, srcr_estimate,
    srcr_for_config, theoretical_compression_rate, CompressionConfig, ConfigKind, SrcrBreakdown,
    TaskScore,
};
use crate::Rational;

/// Published means further than this from the recomputed task average are flagged.
pub const MEAN_FLAG_THRESHOLD: f64 = 0.05;

/// Which aggregate a caller ranks or plots by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SrKind {
    /// Ratio of summed task scores (the default).
    #[default]
    TaskSum,
    /// Retention of the published mean column.
    MeanColumn,
    /// Mean of per-task ratios.
    TaskMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRetention {
    pub task: String,
    pub original: f64,
    pub compressed: f64,
    pub retention: f64,
    pub stderr: f64,
}

fn rational_str<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&value.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub config: CompressionConfig,
    pub label: String,
    #[serde(serialize_with = "rational_str")]
    pub tcr: Rational,
    /// Per-task retention, excluding the published mean.
    pub tasks: Vec<TaskRetention>,
    /// Ratio of summed task scores.
    pub sr: f64,
    pub sr_stderr: f64,
    /// Mean of per-task ratios.
    pub sr1: f64,
    /// Retention of the published mean column, when present.
    pub sr_mean: Option<f64>,
    /// Rate matching the configuration kind, computed from `sr`.
    pub srcr: SrcrBreakdown,
    /// Product of the pruning-only and quantization-only rates (joint rows only).
    pub srcr_estimate: Option<f64>,
    /// Published mean minus recomputed task average, when they differ by more than
    /// [`MEAN_FLAG_THRESHOLD`].
    pub mean_discrepancy: Option<f64>,
}

impl ReportRow {
    pub fn sr_of(&self, kind: SrKind) -> Option<f64> {
        match kind {
            SrKind::TaskSum => Some(self.sr),
            SrKind::MeanColumn => self.sr_mean,
            SrKind::TaskMean => Some(self.sr1),
        }
    }

    pub fn tcr_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self.tcr).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionReport {
    pub rows: Vec<ReportRow>,
}

impl RetentionReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn find(&self, model: &str, config: &CompressionConfig) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && &r.config == config)
    }

    /// Task columns present in any row, in display order.
    pub fn task_columns(&self) -> Vec<String> {
        let mut tasks: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.tasks.iter().map(|t| t.task.clone()))
            .collect();
        tasks.sort_by_key(|t| task_order(t));
        tasks.dedup();
        tasks
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.model.clone()).collect();
        m.dedup();
        m
    }
}

struct ConfigScores<'a> {
    config: CompressionConfig,
    tasks: Vec<&'a ScoreRecord>,
    mean: Option<&'a ScoreRecord>,
}

fn group_by_config<'a>(dataset: &'a ScoreDataset, model: &str) -> Vec<ConfigScores<'a>> {
    let mut groups: BTreeMap<String, ConfigScores<'a>> = BTreeMap::new();
    for r in dataset.records().iter().filter(|r| r.model == model) {
        let g = groups
            .entry(r.config.to_string())
            .or_insert_with(|| ConfigScores {
                config: r.config,
                tasks: Vec::new(),
                mean: None,
            });
        if r.task == MEAN_TASK {
            g.mean = Some(r);
        } else {
            g.tasks.push(r);
        }
    }
    for g in groups.values_mut() {
        g.tasks.sort_by_key(|r| task_order(&r.task));
    }
    groups.into_values().collect()
}

/// Aggregates of one configuration against the baseline.
struct Aggregates {
    tasks: Vec<TaskRetention>,
    sr: f64,
    sr_stderr: f64,
    sr1: f64,
    sr_mean: Option<f64>,
    mean_discrepancy: Option<f64>,
}

fn aggregate(
    model: &str,
    group: &ConfigScores<'_>,
    baseline: &ConfigScores<'_>,
) -> Result<Aggregates, ResultsError> {
    let baseline_task = |task: &str| -> Result<&ScoreRecord, ResultsError> {
        baseline
            .tasks
            .iter()
            .chain(baseline.mean.iter())
            .find(|b| b.task == task)
            .copied()
            .ok_or_else(|| ResultsError::MissingBaselineTask {
                model: base_model(model).to_string(),
                task: task.to_string(),
            })
    };
    let mut scores = Vec::with_capacity(group.tasks.len());
    for r in &group.tasks {
        let b = baseline_task(&r.task)?;
        scores
            .push(TaskScore::new(r.task.clone(), b.score, r.score).with_stderr(b.stderr, r.stderr));
    }
    let sr_mean = match group.mean {
        Some(m) => {
            let b = baseline_task(MEAN_TASK)?;
            Some(crate::metrics::retention_rate(&TaskScore::new(
                MEAN_TASK, b.score, m.score,
            ))?)
        }
        None => None,
    };
    let tasks = scores
        .iter()
        .map(|s| {
            let (retention, stderr) = retention_with_stderr(s)?;
            Ok(TaskRetention {
                task: s.task.clone(),
                original: s.original,
                compressed: s.compressed,
                retention,
                stderr,
            })
        })
        .collect::<Result<Vec<_>, ResultsError>>()?;
    let (sr, sr_stderr, sr1) = if scores.is_empty() {
        let sr = sr_mean.ok_or(crate::metrics::MetricsError::EmptyScores)?;
        (sr, 0.0, sr)
    } else {
        let sum = TaskScore::new(
            "<sum>",
            scores.iter().map(|s| s.original).sum(),
            scores.iter().map(|s| s.compressed).sum(),
        )
        .with_stderr(
            scores
                .iter()
                .map(|s| s.original_stderr.powi(2))
                .sum::<f64>()
                .sqrt(),
            scores
                .iter()
                .map(|s| s.compressed_stderr.powi(2))
                .sum::<f64>()
                .sqrt(),
        );
        let (_, stderr) = retention_with_stderr(&sum)?;
        (
            semantic_retention_sr2(&scores)?,
            stderr,
            semantic_retention_sr1(&scores)?,
        )
    };
    let mean_discrepancy = match (group.mean, scores.is_empty()) {
        (Some(m), false) => {
            let avg = scores.iter().map(|s| s.compressed).sum::<f64>() / scores.len() as f64;
            let diff = m.score - avg;
            (diff.abs() > MEAN_FLAG_THRESHOLD).then_some(diff)
        }
        _ => None,
    };
    Ok(Aggregates {
        tasks,
        sr,
        sr_stderr,
        sr1,
        sr_mean,
        mean_discrepancy,
    })
}

/// Retention, rates and SrCr for every configuration of `model`.
pub fn retention_report(
    dataset: &ScoreDataset,
    model: &str,
) -> Result<RetentionReport, ResultsError> {
    let groups = group_by_config(dataset, model);
    if groups.is_empty() {
        return Err(ResultsError::UnknownModel(model.to_string()));
    }
    let base_groups = group_by_config(dataset, base_model(model));
    let baseline = base_groups
        .iter()
        .find(|g| g.config == CompressionConfig::baseline())
        .ok_or_else(|| ResultsError::MissingBaseline {
            model: base_model(model).to_string(),
        })?;
    let mut aggregates = Vec::with_capacity(groups.len());
    for g in &groups {
        aggregates.push(aggregate(model, g, baseline)?);
    }
    let sr_by_config: BTreeMap<String, f64> = groups
        .iter()
        .zip(&aggregates)
        .map(|(g, a)| (g.config.to_string(), a.sr))
        .collect();

    let mut rows = Vec::with_capacity(groups.len());
    for (g, a) in groups.iter().zip(aggregates) {
        let srcr = srcr_for_config(&g.config, a.sr)?;
        let srcr_estimate = match g.config.kind() {
            ConfigKind::Joint => {
                let prune_cfg = CompressionConfig::new(
                    g.config.sparsity(),
                    Rational::from_integer(crate::metrics::BASELINE_BITS),
                    g.config.pattern(),
                )?;
                let quant_cfg = CompressionConfig::quantization(g.config.bits())?;
                match (
                    sr_by_config.get(&prune_cfg.to_string()),
                    sr_by_config.get(&quant_cfg.to_string()),
                ) {
                    (Some(&sp), Some(&sq)) => Some(srcr_estimate(
                        &srcr_for_config(&prune_cfg, sp)?,
                        &srcr_for_config(&quant_cfg, sq)?,
                    )),
                    _ => None,
                }
            }
            _ => None,
        };
        rows.push(ReportRow {
            model: model.to_string(),
            config: g.config,
            label: g.config.label(),
            tcr: theoretical_compression_rate(&g.config),
            tasks: a.tasks,
            sr: a.sr,
            sr_stderr: a.sr_stderr,
            sr1: a.sr1,
            sr_mean: a.sr_mean,
            srcr,
            srcr_estimate,
            mean_discrepancy: a.mean_discrepancy,
        });
    }
    sort_rows(&mut rows);
    Ok(RetentionReport { rows })
}

/// Reports for every model in the dataset, concatenated.
pub fn full_report(dataset: &ScoreDataset) -> Result<RetentionReport, ResultsError> {
    let mut rows = Vec::new();
    for model in dataset.models() {
        rows.extend(retention_report(dataset, &model)?.rows);
    }
    sort_rows(&mut rows);
    Ok(RetentionReport { rows })
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.model
            .cmp(&b.model)
            .then(a.tcr.cmp(&b.tcr))
            .then_with(|| a.config.to_string().cmp(&b.config.to_string()))
    });
}
