//! Compression-rate and retention metrics.
//!
//! Rates are exact rationals; retention and the SrCr family are `f64`.

mod config;
mod retention;
mod search;
mod srcr;
mod tcr;

pub use config::{
    format_percent, format_rational_fixed, parse_bits, parse_decimal, parse_rational,
    parse_sparsity, snap_fraction, CompressionConfig, ConfigKind, NMPattern, SparsityPattern,
    BASELINE_BITS, SNAP_TOLERANCE_PCT,
};
pub use retention::{
    retention_rate, retention_with_stderr, semantic_retention_sr1, semantic_retention_sr2,
    TaskScore,
};
pub use search::optimal_config_search;
pub use srcr::{
    pruning_factor, quantization_factor, srcr_estimate, srcr_for_config, srcr_joint, srcr_pruning,
    srcr_quantization, SrcrBreakdown,
};
pub use tcr::{
    render_tcr, tcr_table, theoretical_compression_rate, TcrTable, TABLE_BITS, TABLE_SPARSITIES,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("sparsity {0} outside [0, 1]")]
    SparsityOutOfRange(String),
    #[error("bit-width {0} outside the supported range")]
    BitsOutOfRange(String),
    #[error("invalid N:M pattern {0}")]
    InvalidPattern(String),
    #[error("pattern does not match sparsity: {0}")]
    PatternMismatch(String),
    #[error("retention undefined for task {task:?}: original score is {original}")]
    UndefinedRetention { task: String, original: f64 },
    #[error("semantic retention needs at least one task")]
    EmptyScores,
    #[error("semantic retention must be non-negative, got {0}")]
    NegativeRetention(f64),
    #[error("nothing to rank")]
    EmptyRecords,
    #[error("empty {0} list")]
    EmptyAxis(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
}
