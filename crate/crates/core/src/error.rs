use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Gamma pole at argument {0}")]
    Pole(f64),
    #[error("outside the valid regime: {0}")]
    Regime(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("singular point: {0}")]
    Singularity(String),
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("operator not coercive (margin {0:.3e})")]
    Coercivity(f64),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("ill-conditioned fit (condition number {0:.3e})")]
    IllConditionedFit(f64),
    #[error("eigen-solve failed: {0}")]
    EigenFailure(String),
    #[error("tangent Gram matrix singular")]
    GramSingular,
    #[error("bracket does not change sign: {0}")]
    Bracket(String),
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("more than one dominant peak (ratio {0:.3})")]
    MultiPeak(f64),
    #[error("blow-up fit diverged: {0}")]
    FitDivergence(String),
    #[error("mesh grading violated: {0}")]
    Grading(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
