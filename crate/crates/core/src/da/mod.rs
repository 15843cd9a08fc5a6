//! Truncated multivariate Taylor polynomials (differential algebra).
//!
//! A [`TaylorPoly`] holds every coefficient `a_β` with `|β| <= n` of a
//! polynomial in `m` variables. Arithmetic drops terms above order `n`, so
//! evaluating a smooth function on polynomial inputs yields its Taylor
//! expansion to that order. Polynomials are immutable values; all operations
//! allocate a new result.

mod intrinsics;
mod map;
mod poly;
mod scalar;
mod space;

use thiserror::Error;

pub use intrinsics::Intrinsic;
pub use map::{invert_matrix, TaylorMap, MAX_CONDITION};
pub use poly::{TaylorPoly, COEFF_FLOOR};
pub use scalar::Scalar;
pub use space::{space, DaSpace, MultiIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaError {
    #[error("polynomial spaces differ: ({}, {}) vs ({}, {})", left.0, left.1, right.0, right.1)]
    Mismatch { left: (usize, usize), right: (usize, usize) },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("truncation order must be at least 1")]
    ZeroOrder,
    #[error("a polynomial space needs at least one variable")]
    NoVariables,
    #[error("space with {nvars} variables at order {order} is too large")]
    SpaceTooLarge { nvars: usize, order: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("multi-index of degree {degree} exceeds order {order}")]
    DegreeTooHigh { degree: usize, order: usize },
    #[error("non-finite coefficient {0}")]
    NonFinite(f64),
    #[error("{function} undefined at constant term {constant}")]
    Domain { function: &'static str, constant: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("component {component} has non-zero constant part {value}")]
    NonZeroConstant { component: usize, value: f64 },
    #[error("map with {components} components in {nvars} variables is not square")]
    NotSquare { components: usize, nvars: usize },
    #[error("linear part is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("child box leaves the parent box along variable {index}")]
    ChildOutsideParent { index: usize },
    #[error("malformed polynomial text at line {line}")]
    Parse { line: usize },
}
