use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: String },
    #[error("matrix is not hyperbolic")]
    NotHyperbolic,
    #[error("cannot certify the distance of a characteristic root to the unit circle (closest {distance:e})")]
    AmbiguousSpectrum { distance: f64 },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("state space of {states} exceeds the budget of {cap}")]
    BudgetExceeded { states: u128, cap: u128 },
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invariant subgroup has rank {rank} < {dim}")]
    RankDeficient { rank: usize, dim: usize },
    #[error("walk mod {n} does not converge: {reason}")]
    NotConvergent { n: u64, reason: String },
    #[error("certified sup of f is {gamma} >= 1")]
    NotContractive { gamma: f64 },
    #[error("points are {distance} apart, not within {epsilon}")]
    TooFar { distance: f64, epsilon: f64 },
    #[error("step {index} deviates by {deviation} >= alpha = {alpha}")]
    NotPseudoOrbit { index: usize, deviation: f64, alpha: f64 },
    #[error("alpha = {alpha} too large: shadowing needs alpha * (1 + |A|) / (1 - lambda) < {limit}")]
    AlphaTooLarge { alpha: f64, limit: f64 },
    #[error("only d = 2 is supported here, got d = {0}")]
    DimensionUnsupported(usize),
    #[error("word has an empty cylinder at position {position}")]
    EmptyIntersection { position: i64 },
    #[error("partition diameter {diameter} is not below {delta0}")]
    DiameterTooLarge { diameter: f64, delta0: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
