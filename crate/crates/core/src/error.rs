use thiserror::Error;

/// Errors raised by the library. Degenerate estimates (log of a zero
/// probability) are reported as `-inf` values, not as errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid specificity profile: {0}")]
    InvalidProfile(String),

    #[error("objects live on different state spaces")]
    SpaceMismatch,

    #[error("target set is empty")]
    EmptyTarget,

    #[error("target complement is empty; the search is absorbed at t = 0")]
    EmptyComplement,

    #[error("null probability of the target is zero")]
    NullTargetZero,

    #[error("null model assigns zero probability to the target")]
    NullModelTargetZero,

    #[error("Q is not absolutely continuous with respect to P at state {0}")]
    SupportViolation(usize),

    #[error("value {value} outside the admissible range {range}")]
    OutOfRange { value: f64, range: String },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid proposal kernel: {0}")]
    InvalidKernel(String),

    #[error("Moran acceptance needs reciprocal proposals; q({0},{1}) > 0 but q({1},{0}) = 0")]
    ReciprocityViolation(usize, usize),

    #[error("null distribution has zero mass at state {0}")]
    ZeroNullMass(usize),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("specificity function is constant on the support of the null")]
    ConstantSpecificity,

    #[error("log-likelihood is flat along parameter axis {0}")]
    NonIdentifiable(usize),

    #[error("sandwich matrix is singular")]
    SingularSandwich,

    #[error("invalid null probability {0}; must lie in (0, 1)")]
    InvalidNull(f64),

    #[error("normal approximation has non-positive variance {0}")]
    DegenerateVariance(f64),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
