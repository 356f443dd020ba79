//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// A grid cell identified by object id and time value.
pub type Cell = (String, f64);

/// Errors produced by validation, solving, scoring, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no records")]
    EmptyInput,

    #[error("non-finite coordinate for id `{id}` at t = {time}")]
    NonFiniteCoordinate { id: String, time: f64 },

    #[error("{}", format_grid_report(missing, duplicates))]
    IncompleteGrid {
        /// (id, time) cells with no observation.
        missing: Vec<Cell>,
        /// (id, time) cells observed more than once.
        duplicates: Vec<Cell>,
    },

    #[error("inconsistent spatial dimension ({context}): expected {expected}, got {actual}")]
    InconsistentDimension {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("k = {k} exceeds the number of points n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cluster {label} has no members")]
    EmptyCluster { label: usize },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("id `{id}` has no observations; gap cannot be filled")]
    UnfillableGap { id: String },

    #[error("{stage}: {source}")]
    Staged {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn staged(stage: &str, source: Error) -> Error {
        Error::Staged {
            stage: stage.to_string(),
            source: Box::new(source),
        }
    }

    /// Whether this error stems from invalid input or configuration rather
    /// than a runtime failure. Used by the CLI to pick its exit code.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Staged { source, .. } => source.is_validation(),
            Error::Io(_) => false,
            _ => true,
        }
    }
}

fn format_grid_report(missing: &[Cell], duplicates: &[Cell]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        let cells: Vec<String> = missing
            .iter()
            .take(10)
            .map(|(id, t)| format!("({id}, {t})"))
            .collect();
        let suffix = if missing.len() > 10 { ", ..." } else { "" };
        parts.push(format!(
            "{} missing observation(s): {}{}",
            missing.len(),
            cells.join(", "),
            suffix
        ));
    }
    if !duplicates.is_empty() {
        let cells: Vec<String> = duplicates
            .iter()
            .take(10)
            .map(|(id, t)| format!("({id}, {t})"))
            .collect();
        let suffix = if duplicates.len() > 10 { ", ..." } else { "" };
        parts.push(format!(
            "{} duplicate observation(s): {}{}",
            duplicates.len(),
            cells.join(", "),
            suffix
        ));
    }
    if parts.is_empty() {
        "incomplete observation grid".to_string()
    } else {
        format!("incomplete observation grid: {}", parts.join("; "))
    }
}
