use alloc::string::String;

/// Errors reported by the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("Sylvester operator is numerically singular (A and -B share an eigenvalue)")]
    SingularOperator,
    #[error("real Schur iteration did not converge")]
    SchurNoConvergence,
    #[error("matrix exponential overflowed")]
    NumericalOverflow,
    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eig:e})")]
    NotSpd { min_eig: f64 },
    #[error("matrix is not diagonalizable over the reals: {0}")]
    NotDiagonalizable(String),
    #[error("matrix is numerically singular: {0}")]
    SingularMatrix(&'static str),
    #[error("small linear system I - F is numerically singular")]
    SingularSmallSystem,
    #[error("denominator 2 + trace(A^-1 C) vanishes")]
    ZeroDenominator,
    #[error("the equation has no solution")]
    NoSolution,
    #[error("the equation has infinitely many solutions")]
    NonUniqueSolution,
    #[error("degenerate polynomial: {0}")]
    DegenerateCase(&'static str),
    #[error("no real solution")]
    NoRealSolution,
    #[error("iteration report has {have} iterations, at least {need} required")]
    TooFewIterations { have: usize, need: usize },
    #[error("derivative vanishes at y = {y:e}")]
    DerivativeVanishes { y: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("iterate y = {y:e} left the domain of g")]
    DomainExit { y: f64 },
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("invalid elasticity parameters: {0}")]
    InvalidElasticity(String),
    #[error("step length backtracking failed at step {step}")]
    StepFailure { step: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
