//! Benchmark score tables, retention reports, and table and plot output.
//!
//! Score files are CSV (`model,sparsity,bits,pattern,task,score,stderr`) or a JSON
//! array of `{model, config, task, score, stderr}`. Each model needs its
//! uncompressed scores (sparsity 0, 16 bits) to serve as the retention baseline.

mod dataset;
mod emit;
mod fixtures;
mod report;

pub use dataset::{
    base_model, load_scores, parse_csv_records, parse_json_records, parse_records, task_order,
    ScoreDataset, ScoreFormat, ScoreRecord, KNOWN_TASKS, MEAN_TASK,
};
pub use emit::{
    emit_plot_data, emit_table, FigureKind, PlotBundle, PlotPoint, TableFormat, EQUAL_RATE_TRIPLES,
};
pub use fixtures::{
    bundled_fixtures, fixture_dir_override, load_fixtures, BUNDLED_TABLES, FIXTURES_ENV,
};
pub use report::{
    full_report, retention_report, ReportRow, RetentionReport, SrKind, TaskRetention,
    MEAN_FLAG_THRESHOLD,
};

use thiserror::Error;

use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{source_name}: line {line}, {field}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        field: String,
        message: String,
    },
    #[error("duplicate record ({model}, {config}, {task})")]
    Duplicate {
        model: String,
        config: String,
        task: String,
    },
    #[error("conflicting records for ({model}, {config}, {task}) across files")]
    Conflict {
        model: String,
        config: String,
        task: String,
    },
    #[error("score {score} outside [0, 100] in record {record}")]
    ScoreOutOfRange { record: String, score: f64 },
    #[error("invalid record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },
    #[error("model {model:?} has no baseline rows (sparsity 0, 16 bits)")]
    MissingBaseline { model: String },
    #[error("baseline of {model:?} has no score for task {task:?}")]
    MissingBaselineTask { model: String, task: String },
    #[error("model {0:?} not in dataset")]
    UnknownModel(String),
    #[error("report is empty")]
    EmptyReport,
    #[error("model {model:?}: {joint} has no paired {quant}")]
    MissingPair {
        model: String,
        joint: String,
        quant: String,
    },
    #[error("cannot infer score format of {0}")]
    UnknownFormat(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
