use thiserror::Error;

use crate::exprlang::ParseError;

/// Every failure the library reports.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("matrix is singular to working precision (condition estimate {cond:.3e})")]
    NearSingular { cond: f64 },
    #[error("bordered system is singular; kernel is not simple")]
    DegenerateKernel,
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("converged eigenvector is not positive: {0}")]
    NotPrincipal(String),
    #[error("positivity property violated: {0}")]
    PositivityViolated(String),
    #[error("no sign change of Re mu over the phase sweep")]
    NoCrossing,
    #[error("crossing found with non-positive frequency nu = {nu:.3e}")]
    WrongBranch { nu: f64 },
    #[error("inconsistent results: {0}")]
    Inconsistency(String),
    #[error("operation requires the {expected} regime")]
    WrongRegime { expected: &'static str },
    #[error("no real branch: {0}")]
    NoRealBranch(String),
    #[error("Newton converged to the trivial solution")]
    TrivialSolution,
    #[error("duality scalar S_n vanishes (|S_n| = {modulus:.3e})")]
    DegenerateDuality { modulus: f64 },
    #[error("resonant resolvent (condition estimate {cond:.3e})")]
    Resonance { cond: f64 },
    #[error("Re dmu/dtau vanishes")]
    DegenerateTransversality,
    #[error("growth law evaluated outside its domain: {0}")]
    Domain(String),
    #[error("simulation diverged at t = {t:.4} (sup norm {sup:.3e})")]
    Divergence { t: f64, sup: f64 },
    #[error("invalid time stepping: {0}")]
    InvalidStep(String),
    #[error("probe {index} at {point:?} lies outside the domain")]
    ProbeOutside { index: usize, point: [f64; 2] },
    #[error("branch undefined: {0}")]
    BranchUndefined(String),
    #[error("at lambda = {lambda}: {source}")]
    AtLambda { lambda: f64, source: Box<Error> },
    #[error("dense oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
