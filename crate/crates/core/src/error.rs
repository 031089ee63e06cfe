use alloc::string::String;
use core::fmt;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain of a geometric map (origin, outside the tube).
    Domain(String),
    /// A request that would exceed a hard resource guard.
    Resource(String),
    /// Unsupported or inconsistent configuration.
    Config(String),
    /// Degenerate geometry: nonpositive Jacobian, vanishing gradient, ...
    Geometry(String),
    /// Scalar root finding failed to bracket or converge.
    RootFind(String),
    /// Point lookup or element inversion failed.
    Lookup(String),
    /// Inconsistent algebraic data (zero diagonal, size mismatch).
    Assembly(String),
    /// Krylov solver breakdown or indefiniteness.
    Solver(String),
    /// Iteration budget exhausted before reaching the tolerance.
    NotConverged { iterations: usize, residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Resource(m) => write!(f, "resource limit: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::RootFind(m) => write!(f, "root finding failed: {m}"),
            Error::Lookup(m) => write!(f, "lookup error: {m}"),
            Error::Assembly(m) => write!(f, "assembly error: {m}"),
            Error::Solver(m) => write!(f, "solver error: {m}"),
            Error::NotConverged { iterations, residual } => write!(
                f,
                "solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
