use std::path::PathBuf;

use super::dataset::{load_scores, parse_records, ScoreDataset, ScoreFormat};
use super::ResultsError;

/// Environment variable naming a fixture directory to use instead of the bundled tables.
pub const FIXTURES_ENV: &str = "SRCR_FIXTURES";

/// The six bundled score tables as `(file name, contents)`.
pub const BUNDLED_TABLES: [(&str, &str); 6] = [
    (
        "gptq-quantization-only-results.csv",
        include_str!("../../../../fixtures/paper_tables/gptq-quantization-only-results.csv"),
    ),
    (
        "gptq-vs-nf4-llm-int8-results.csv",
        include_str!("../../../../fixtures/paper_tables/gptq-vs-nf4-llm-int8-results.csv"),
    ),
    (
        "sparsegpt-gptq-semi-structured-joint-results.csv",
        include_str!(
            "../../../../fixtures/paper_tables/sparsegpt-gptq-semi-structured-joint-results.csv"
        ),
    ),
    (
        "sparsegpt-gptq-unstructured-joint-results.csv",
        include_str!(
            "../../../../fixtures/paper_tables/sparsegpt-gptq-unstructured-joint-results.csv"
        ),
    ),
    (
        "sparsegpt-semi-structured-pruning-only-results.csv",
        include_str!(
            "../../../../fixtures/paper_tables/sparsegpt-semi-structured-pruning-only-results.csv"
        ),
    ),
    (
        "sparsegpt-unstructured-pruning-only-results.csv",
        include_str!(
            "../../../../fixtures/paper_tables/sparsegpt-unstructured-pruning-only-results.csv"
        ),
    ),
];

/// The bundled tables merged into one dataset.
pub fn bundled_fixtures() -> Result<ScoreDataset, ResultsError> {
    let sources = BUNDLED_TABLES
        .iter()
        .map(|(name, text)| parse_records(text, ScoreFormat::Csv, name))
        .collect::<Result<Vec<_>, _>>()?;
    ScoreDataset::merge(sources)
}

/// Fixture directory override from the environment, if set.
pub fn fixture_dir_override() -> Option<PathBuf> {
    std::env::var_os(FIXTURES_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// The override directory when set, otherwise the bundled tables.
pub fn load_fixtures() -> Result<ScoreDataset, ResultsError> {
    match fixture_dir_override() {
        Some(dir) => load_scores(&dir, None),
        None => bundled_fixtures(),
    }
}
