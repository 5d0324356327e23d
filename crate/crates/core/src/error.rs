use thiserror::Error;

/// Failure modes shared by every evaluator in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series did not converge within {terms} terms ({what})")]
    NonConvergent { what: &'static str, terms: usize },
    #[error("point z = {re}+{im}i lies outside the convergence strip")]
    OutOfStrip { re: f64, im: f64 },
    #[error("evaluation at a singular point ({0})")]
    SingularPoint(String),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("degenerate twist (theta, phi) = (1, 1)")]
    DegenerateTwist,
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("square-root branch ambiguity: {0}")]
    BranchAmbiguity(String),
    #[error("limit unstable: extrapolants differ by {0:e} relative")]
    LimitUnstable(f64),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
