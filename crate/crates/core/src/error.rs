//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("noise model block Pi22 is not negative definite (lambda_max = {lambda_max})")]
    NotNegativeDefinite { lambda_max: f64 },
    #[error("noise model Schur complement Pi|Pi22 is not positive semidefinite (lambda_min = {lambda_min})")]
    SchurNotPsd { lambda_min: f64 },
    #[error("parameter set is not compact (regressor lacks full row rank)")]
    NotCompact,
    #[error("noise set Z(Pi) is unbounded")]
    UnboundedNoiseSet,
    #[error("rejection sampling exceeded {0} proposals")]
    RejectionOverflow(usize),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("b(z) is not in the range of the regressor")]
    NotInRange,
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("direction c must be nonzero")]
    ZeroDirection,
    #[error("basis metadata missing: {0}")]
    MissingMetadata(String),
    #[error("b(z) = 0: the gradient formula is singular there")]
    ZeroBasisVector,
    #[error("points z and z* coincide")]
    CoincidentPoints,
    #[error("analytic Jacobian unavailable: {0}")]
    MissingJacobian(String),
    #[error("basis Lipschitz constant L_b not declared")]
    MissingLb,
    #[error("basis does not declare the linear/remainder decomposition needed here")]
    MissingDecomposition,
    #[error("vertex set is empty")]
    EmptyVertexSet,
    #[error("covering grid is empty")]
    EmptyGrid,
    #[error("covering radius must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("stability of the system set has not been certified")]
    StabilityNotCertified,
    #[error("lambda must lie in [0,1), got {0}")]
    LambdaOutOfRange(f64),
    #[error("local pattern invalid: {0}")]
    InvalidPattern(String),
    #[error("excitation floor violated: sigma_min(Phi) = {sigma} < {floor}")]
    ExcitationFloorViolated { sigma: f64, floor: f64 },
    #[error("measurement oracle failure: {0}")]
    OracleFailure(String),
    #[error("unknown basis family: {0}")]
    UnknownFamily(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
