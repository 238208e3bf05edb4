//! Error type shared across the library.

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A table with no observations where at least one is required.
    #[error("empty table: total count is zero")]
    EmptyTable,

    /// An operation that needs a minimum sample size.
    #[error("insufficient sample: need n >= {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    /// A statistic that is undefined for the given sample, e.g. a constant
    /// variable making the normalizing variance vanish.
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// Influence function undefined at the contamination point because a
    /// margin appearing in a denominator is zero.
    #[error("singular influence at ({x}, {y}): zero margin in a denominator")]
    SingularInfluence { x: usize, y: usize },

    /// Threshold selector cannot run on the given statistics.
    #[error("selector error: {0}")]
    Selector(String),

    /// Evaluation metric undefined, e.g. a single-class truth vector.
    #[error("metric error: {0}")]
    Metric(String),

    /// Hypothesis test undefined for the given table.
    #[error("undefined test: {0}")]
    UndefinedTest(String),

    /// CSV parse failure, with the 1-based line number of the offending row.
    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: u64, msg: String },

    /// JSON parse failure.
    #[error("json parse error: {0}")]
    Json(#[from] serde_json::Error),

    /// I/O failure with path context.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
