use thiserror::Error;

/// Errors produced by the simulation kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("nothing to decimate: {0} active atom(s) left")]
    NothingToDecimate(usize),

    #[error("pairing is not non-crossing: bond ({}, {}) crosses bond ({}, {})", .first.0, .first.1, .second.0, .second.1)]
    CrossingBonds {
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error("pairing cannot be replayed: bond ({}, {}) encloses an unpaired atom", .bond.0, .bond.1)]
    EnclosedUnpaired { bond: (usize, usize) },

    #[error("step size {step:e} exceeds the stability limit {limit:e}")]
    StepSize { step: f64, limit: f64 },

    #[error("flow became unstable at l_m/L = {l_m:.4}: Q reached {min_q:e}")]
    Instability { l_m: f64, min_q: f64 },

    #[error("undefined fraction: boundary density vanished at l_m/L = {0:.4}")]
    UndefinedFraction(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n} atoms exceeds the configured limit of {max}")]
    ResourceLimit { n: usize, max: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("integrator step size underflow at t = {t:e} (dt = {dt:e})")]
    StiffIntegration { t: f64, dt: f64 },

    #[error("no adiabatic baseline: overlap {overlap:.4} at omega = {omega:e} is below the required {required}")]
    Baseline {
        omega: f64,
        overlap: f64,
        required: f64,
    },

    #[error("fit range error: {0}")]
    FitRange(String),

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
