use thiserror::Error;

use crate::measures::MeasureViolation;

/// Errors produced by the transport toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cost block ({i},{j}) has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    BlockShape {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("invalid measure: {}", join_violations(.0))]
    InvalidMeasure(Vec<MeasureViolation>),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid cost: {0}")]
    InvalidCost(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("total mass mismatch: source carries {source_mass}, target carries {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("middle marginal mismatch at species {}, atom {}: {left} vs {right}", .species + 1, .atom + 1)]
    MarginalMismatch {
        species: usize,
        atom: usize,
        left: f64,
        right: f64,
    },

    #[error("no finite-cost transference plan exists")]
    Infeasible,

    #[error("flattened problem is {rows}x{cols}; the oracle handles at most {limit}x{limit}")]
    OracleSizeExceeded { rows: usize, cols: usize, limit: usize },

    #[error("network simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[MeasureViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
