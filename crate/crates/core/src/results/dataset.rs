use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResultsError;
use crate::metrics::{parse_bits, parse_sparsity, CompressionConfig, SparsityPattern};

/// Task name of the published per-row average.
pub const MEAN_TASK: &str = "mean";
/// Benchmark tasks in display order; any other task sorts after these by name.
pub const KNOWN_TASKS: [&str; 3] = ["mmlu_pro", "bbh", "math"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// Model id. A `@suffix` marks an alternative method on the same base model
    /// (`llama@nf4`); the base model's uncompressed scores serve as its baseline.
    pub model: String,
    pub config: CompressionConfig,
    pub task: String,
    pub score: f64,
    pub stderr: f64,
}

impl ScoreRecord {
    pub fn base_model(&self) -> &str {
        base_model(&self.model)
    }

    fn key(&self) -> (String, String, String) {
        (
            self.model.clone(),
            self.config.to_string(),
            self.task.clone(),
        )
    }
}

pub fn base_model(model: &str) -> &str {
    model.split_once('@').map_or(model, |(base, _)| base)
}

/// Sort key placing the known tasks first, then the rest by name, then `mean`.
pub fn task_order(task: &str) -> (usize, String) {
    if task == MEAN_TASK {
        return (KNOWN_TASKS.len() + 1, String::new());
    }
    match KNOWN_TASKS.iter().position(|t| *t == task) {
        Some(i) => (i, String::new()),
        None => (KNOWN_TASKS.len(), task.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Json,
    Csv,
}

impl ScoreFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

/// Validated score records, kept sorted by (model, config, task).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreDataset {
    records: Vec<ScoreRecord>,
}

impl ScoreDataset {
    /// Validate and index `records`. Duplicate keys are rejected.
    pub fn from_records(records: Vec<ScoreRecord>) -> Result<Self, ResultsError> {
        let mut by_key = BTreeMap::new();
        for r in records {
            validate_record(&r)?;
            let key = r.key();
            if by_key.insert(key.clone(), r).is_some() {
                return Err(ResultsError::Duplicate {
                    model: key.0,
                    config: key.1,
                    task: key.2,
                });
            }
        }
        let dataset = Self {
            records: by_key.into_values().collect(),
        };
        dataset.check_baselines()?;
        Ok(dataset)
    }

    /// Merge several sources. Identical records repeated across sources collapse;
    /// conflicting ones are rejected.
    pub fn merge(sources: Vec<Vec<ScoreRecord>>) -> Result<Self, ResultsError> {
        let mut by_key: BTreeMap<_, ScoreRecord> = BTreeMap::new();
        for source in sources {
            let mut seen = std::collections::BTreeSet::new();
            for r in source {
                validate_record(&r)?;
                let key = r.key();
                if !seen.insert(key.clone()) {
                    return Err(ResultsError::Duplicate {
                        model: key.0,
                        config: key.1,
                        task: key.2,
                    });
                }
                match by_key.get(&key) {
                    Some(prev) if prev != &r => {
                        return Err(ResultsError::Conflict {
                            model: key.0,
                            config: key.1,
                            task: key.2,
                        })
                    }
                    Some(_) => {}
                    None => {
                        by_key.insert(key, r);
                    }
                }
            }
        }
        let dataset = Self {
            records: by_key.into_values().collect(),
        };
        dataset.check_baselines()?;
        Ok(dataset)
    }

    fn check_baselines(&self) -> Result<(), ResultsError> {
        if self.records.is_empty() {
            return Err(ResultsError::EmptyDataset);
        }
        for model in self.models() {
            let base = base_model(&model);
            let has_baseline = self
                .records
                .iter()
                .any(|r| r.model == base && r.config == CompressionConfig::baseline());
            if !has_baseline {
                return Err(ResultsError::MissingBaseline {
                    model: base.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct model ids, sorted.
    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = self.records.iter().map(|r| r.model.clone()).collect();
        out.dedup();
        out
    }

    /// Models without a method suffix.
    pub fn base_models(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .models()
            .iter()
            .map(|m| base_model(m).to_string())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn get(&self, model: &str, config: &CompressionConfig, task: &str) -> Option<&ScoreRecord> {
        self.records
            .iter()
            .find(|r| r.model == model && &r.config == config && r.task == task)
    }
}

fn validate_record(r: &ScoreRecord) -> Result<(), ResultsError> {
    let describe = || format!("{} {} {}", r.model, r.config.label(), r.task);
    if r.model.trim().is_empty() || r.task.trim().is_empty() {
        return Err(ResultsError::InvalidRecord {
            record: describe(),
            reason: "model and task must be non-empty".into(),
        });
    }
    if !(0.0..=100.0).contains(&r.score) {
        return Err(ResultsError::ScoreOutOfRange {
            record: describe(),
            score: r.score,
        });
    }
    if !(r.stderr >= 0.0 && r.stderr.is_finite()) {
        return Err(ResultsError::InvalidRecord {
            record: describe(),
            reason: format!("stderr {} must be finite and non-negative", r.stderr),
        });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    model: String,
    sparsity: String,
    bits: String,
    pattern: String,
    task: String,
    score: String,
    stderr: String,
}

/// Parse score records from CSV text with header `model,sparsity,bits,pattern,task,score,stderr`.
pub fn parse_csv_records(text: &str, source: &str) -> Result<Vec<ScoreRecord>, ResultsError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(|e| ResultsError::Parse {
            source_name: source.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            field: "row".into(),
            message: e.to_string(),
        })?;
        // header is line 1
        let line = out.len() as u64 + 2;
        let perr = |field: &str, message: String| ResultsError::Parse {
            source_name: source.to_string(),
            line,
            field: field.to_string(),
            message,
        };
        let sparsity =
            parse_sparsity(&row.sparsity).map_err(|e| perr("sparsity", e.to_string()))?;
        let bits = parse_bits(&row.bits).map_err(|e| perr("bits", e.to_string()))?;
        let pattern: SparsityPattern = row
            .pattern
            .parse()
            .map_err(|e: crate::metrics::MetricsError| perr("pattern", e.to_string()))?;
        let config = CompressionConfig::new(sparsity, bits, pattern)
            .map_err(|e| perr("pattern", e.to_string()))?;
        let number = |field: &str, text: &str| {
            text.parse::<f64>()
                .map_err(|e| perr(field, format!("{text:?}: {e}")))
        };
        out.push(ScoreRecord {
            model: row.model,
            config,
            task: row.task,
            score: number("score", &row.score)?,
            stderr: number("stderr", &row.stderr)?,
        });
    }
    Ok(out)
}

/// Parse a JSON array of score records.
pub fn parse_json_records(text: &str, source: &str) -> Result<Vec<ScoreRecord>, ResultsError> {
    serde_json::from_str(text).map_err(|e| ResultsError::Parse {
        source_name: source.to_string(),
        line: e.line() as u64,
        field: format!("column {}", e.column()),
        message: e.to_string(),
    })
}

pub fn parse_records(
    text: &str,
    format: ScoreFormat,
    source: &str,
) -> Result<Vec<ScoreRecord>, ResultsError> {
    if text.trim().is_empty() {
        return Err(ResultsError::EmptyDataset);
    }
    match format {
        ScoreFormat::Csv => parse_csv_records(text, source),
        ScoreFormat::Json => parse_json_records(text, source),
    }
}

/// Load one score file, or every `.csv`/`.json` file of a directory (merged).
/// With no explicit format, the file extension decides.
pub fn load_scores(path: &Path, format: Option<ScoreFormat>) -> Result<ScoreDataset, ResultsError> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && ScoreFormat::from_path(p).is_some())
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(ResultsError::EmptyDataset);
        }
        let sources = files
            .iter()
            .map(|f| read_records(f, format))
            .collect::<Result<Vec<_>, _>>()?;
        return ScoreDataset::merge(sources);
    }
    ScoreDataset::from_records(read_records(path, format)?)
}

fn read_records(
    path: &Path,
    format: Option<ScoreFormat>,
) -> Result<Vec<ScoreRecord>, ResultsError> {
    let format = format
        .or_else(|| ScoreFormat::from_path(path))
        .ok_or_else(|| ResultsError::UnknownFormat(path.display().to_string()))?;
    let text = fs::read_to_string(path)?;
    parse_records(&text, format, &path.display().to_string())
}
