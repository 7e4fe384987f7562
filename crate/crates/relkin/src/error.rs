use alloc::string::String;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("{what} not representable as a finite positive double (argument {value})")]
    Range { what: &'static str, value: f64 },

    #[error("{what} did not converge after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("equation of state lost monotonicity at z = {z}: z d(ln p)/dz|eta = {slope:e}")]
    MonotonicityViolation { z: f64, slope: f64 },

    #[error("{what} is singular at z = {z}")]
    Singular { what: &'static str, z: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("macroscopic decomposition failed: {0}")]
    Decomposition(String),

    #[error("state guard violated in cell {cell}: {what} = {value:e}")]
    Guard {
        cell: usize,
        what: &'static str,
        value: f64,
    },

    #[error("rank-deficient basis: {0}")]
    Degenerate(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("inhomogeneity not orthogonal to the null space in cell {cell}: relative residual {relative:e}")]
    NotOrthogonal { cell: usize, relative: f64 },

    #[error("operator of dimension {requested} exceeds the configured limit {limit}")]
    TooLarge { requested: usize, limit: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
