use thiserror::Error;

/// Errors raised by the solvers and their building blocks.
///
/// Algorithmic stops (an iterate leaving an operator domain in the generic
/// engine) are not errors; they are reported through the run status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("half-space normal must be nonzero")]
    ZeroNormal,

    #[error("singular linear system (pivot {pivot:e}); operator is probably not monotone")]
    Singular { pivot: f64 },

    #[error("constraint infeasibility certificate: f(x) = {value:e} > 0 with zero subgradient")]
    InfeasibleConstraint { value: f64 },

    #[error("point outside the domain of {operator} at iteration {iteration}")]
    OutsideDomain { operator: &'static str, iteration: usize },

    #[error("schedule value out of range at iteration {iteration}: {what} = {value} not in [{lower}, {upper}]")]
    ScheduleOutOfRange { what: &'static str, iteration: usize, value: f64, lower: f64, upper: f64 },

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolver { iterations: usize, residual: f64 },

    #[error("perturbation norm {norm:e} exceeds sqrt(delta) = {bound:e}")]
    PerturbationTooLarge { norm: f64, bound: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no active-set pattern satisfies complementarity")]
    NoKktPattern,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
