use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("matrix is not rectangular: row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({row}, {col}) = {value} is negative beyond tolerance")]
    NegativeMass { row: usize, col: usize, value: f64 },
    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("entry {index} = {value} is not a valid probability")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probability vector must be sorted in non-increasing order")]
    NotCanonical,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("map is not surjective onto {range} labels")]
    NotSurjective { range: usize },
    #[error("zero marginal mass at {axis} index {index}")]
    ZeroMarginal { axis: Axis, index: usize },
    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("M = {m_range} outside 1..={max}")]
    MOutOfRange { m_range: usize, max: usize },
    #[error("theta must be nonnegative, got {0}")]
    NegativeTheta(f64),
    #[error("inertia vector invalid: {0}")]
    InvalidInertias(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("box constraints infeasible for budget {budget} (lower {lower}, upper {upper})")]
    InfeasibleBox { budget: f64, lower: f64, upper: f64 },
    #[error("barrier solver stopped at gap {gap:e}; best certified value {best_certified}")]
    SolverFailure { best_certified: f64, gap: f64 },
    #[error("distribution has a single outcome")]
    DegenerateSupport,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("pair {index} is not a majorization pair")]
    NotAMajorizationPair { index: usize },
    #[error("enumeration of {count} surjections exceeds cap {cap}")]
    TooLarge { count: u128, cap: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Column => f.write_str("column"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
