use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("dimension mismatch: expected {expected} sites, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trajectory too short: need at least {needed} slices, got {found}")]
    TrajectoryTooShort { needed: usize, found: usize },

    #[error("coin is not homogeneous; this quantity is only defined for constant coins")]
    InhomogeneousCoin,

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("non-finite amplitude at site {site}")]
    NonFinite { site: usize },

    #[error("degenerate coordinates at (j={j}, p={p}): det = {det:.3e}")]
    DegenerateCoordinates { j: usize, p: usize, det: f64 },

    #[error("inconsistent frame: lambda^2 = {lambda_sq} but exp(rapidity) = {expected}")]
    InconsistentFrame { lambda_sq: f64, expected: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-positive time step V = {0:.3e}")]
    NonPositiveTimeStep(f64),

    #[error("no admissible branch for the time-variable scheme at step {0}")]
    NoAdmissibleBranch(usize),
}

pub type Result<T> = std::result::Result<T, WalkError>;
