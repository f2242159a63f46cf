//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A Fock-space cutoff below the minimum meaningful size.
    #[error("invalid dimension {0}: truncated operators need at least 2 levels")]
    InvalidDimension(usize),

    /// Too much population parked on the top Fock levels for the result to be trusted.
    #[error("cutoff too small: tail mass {tail_mass:.3e} exceeds {limit:.1e} ({context})")]
    CutoffTooSmall {
        tail_mass: f64,
        limit: f64,
        context: String,
    },

    /// A scalar argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched matrix shapes or mode layouts.
    #[error("shape error: {0}")]
    Shape(String),

    /// A matrix that must be Hermitian is not, beyond tolerance.
    #[error("not Hermitian: max |A - A^dag| element {0:.3e}")]
    NotHermitian(f64),

    /// A density matrix with trace away from one.
    #[error("invalid trace {0}: density operators must have unit trace")]
    InvalidTrace(f64),

    /// A matrix that must be positive semidefinite has a negative eigenvalue.
    #[error("not positive: min eigenvalue {0:.3e}")]
    NotPositive(f64),

    /// A quadrature grid that cannot represent the state it is given.
    #[error("grid error: {0}")]
    Grid(String),

    /// A request outside what an operation supports.
    #[error("unsupported request: {0}")]
    Unsupported(String),

    /// An exact constraint (entropy shell, normalization) could not be met.
    #[error("constraint error: {0}")]
    Constraint(String),

    /// A configuration that would exceed the memory or time budget.
    #[error("resource error: {0}")]
    Resource(String),

    /// Integrator step control failure (trace drift, step size).
    #[error("step error: {0}")]
    Step(String),

    /// Linear algebra backend failure.
    #[error("linear algebra error: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
