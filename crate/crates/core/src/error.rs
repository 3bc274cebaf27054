use thiserror::Error;

use crate::simplex_qp::QpResult;

pub type Result<T> = std::result::Result<T, SebError>;

#[derive(Debug, Error)]
pub enum SebError {
    #[error("invalid radius: {0}")]
    InvalidRadius(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("instance must contain at least one ball")]
    NoBalls,

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("quadratic x'x - 2a'x + theta has empty sublevel set (|a|^2 - theta = {0})")]
    NotABall(f64),

    #[error("gram matrix is not square and symmetric")]
    InvalidGram,

    #[error("affine system is inconsistent (residual {0:e})")]
    InconsistentSystem(f64),

    #[error("Frank-Wolfe did not converge: gap {:e} after {} iterations", .0.gap, .0.iterations)]
    NonConvergence(Box<QpResult>),

    #[error("grid of {0} points exceeds the enumeration guard")]
    CombinatorialBlowup(u128),

    #[error("singular map: rank{{a_i - a}} = {rank} with n = {n}, m = {m}")]
    SingularA { rank: usize, n: usize, m: usize },

    #[error("membership in G* is only decidable when rank{{a_i - a}} < n or = n = m")]
    UnsupportedRegime,

    #[error("affine transform is singular")]
    SingularTransform,

    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("validation failure: {0}")]
    ValidationFailure(String),

    #[error("intersection of balls has empty interior")]
    EmptyInterior,

    #[error("rejection sampling stalled (acceptance below 1e-6)")]
    RejectionStall,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("grid oracle supports n <= 3, got n = {0}")]
    DimensionTooLarge(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
