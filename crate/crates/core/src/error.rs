use thiserror::Error;

/// Errors produced by validation and numerical routines.
///
/// Row/column/voxel positions in messages are 1-based, matching all
/// user-facing output.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one voxel row and one subject column")]
    EmptyMatrix,

    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error(
        "invalid p-value {value} at (row {row}, col {col}); entries must be finite and in [0, 1]"
    )]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("granularity {gamma} out of range [1, {subjects}]")]
    InvalidGamma { gamma: usize, subjects: usize },

    #[error("level alpha={alpha} must lie in (0, 1)")]
    InvalidAlpha { alpha: f64 },

    #[error("selection threshold tau={tau} must lie in (0, 1]")]
    InvalidTau { tau: f64 },

    #[error("tau grid must be non-empty, strictly increasing, with values in (0, 1]")]
    InvalidTauGrid,

    #[error("conditional p-value requires pc <= tau, got pc={pc}, tau={tau}")]
    ConditionalOutOfRange { pc: f64, tau: f64 },

    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("bound {value} at voxel {voxel} exceeds subject count {subjects}")]
    BoundOutOfRange {
        voxel: usize,
        value: usize,
        subjects: usize,
    },

    #[error("cannot aggregate an empty trial list")]
    EmptyTrials,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical routine failed to converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
