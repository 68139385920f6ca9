use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by an identically zero series")]
    DivisionByZero,
    #[error("coefficient index {n} outside the stored range [{lo}, {hi})")]
    OutOfRange { n: i64, lo: i64, hi: i64 },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("need at least {needed} terms, got {got}")]
    InsufficientTerms { needed: usize, got: usize },
    #[error("|q| = {0} is not below 1")]
    NotConvergent(f64),
    #[error("tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("point too close to a pole: {0}")]
    PoleProximity(String),
    #[error("zero too close to the contour: {0}")]
    BoundaryZero(String),
    #[error("winding number {0} is not close to an integer")]
    NonIntegerWinding(f64),
    #[error("indeterminate sign: {0}")]
    Indeterminate(String),
    #[error("non-real data: {0}")]
    NonReal(String),
    #[error("f0 and f1 share a zero near {0}")]
    CommonZero(String),
    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
