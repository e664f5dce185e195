use thiserror::Error;

/// Errors shared across all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |M_ij - M_ji| = {asym:e} exceeds {limit:e}")]
    NotSymmetric { asym: f64, limit: f64 },
    #[error("numerical routine failed: {0}")]
    NumericalFailure(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix has eigenvalue {0:e} below the semidefinite tolerance")]
    NotPositiveSemidefinite(f64),
    #[error("Riccati solve failed: {0}")]
    RiccatiFailure(String),
    #[error("actuator index {index} out of range 1..={m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("duplicate actuator index {0}")]
    DuplicateIndex(usize),
    #[error("{combinations} combinations exceed the enumeration cap {cap}")]
    CombinatorialBudgetExceeded { combinations: u128, cap: u128 },
    #[error("direction is not a unit vector: norm = {0}")]
    NotUnitVector(f64),
    #[error("rows are not orthonormal: |VV^T - I| = {0:e}")]
    NotOrthonormalRows(f64),
    #[error("Gram matrix BB^T is singular or not positive definite")]
    SingularGram,
    #[error("order {0} is unsupported; only powers of two are constructible")]
    UnsupportedOrder(usize),
    #[error("unknown fixture name {0:?}")]
    UnknownFixture(String),
    #[error("initial state coincides with the goal; gain selection is unconstrained")]
    ZeroDistance,
    #[error("lambda_M = {0} is not below 1")]
    LambdaAtLeastOne(f64),
    #[error("target is not eventually reachable under this actuator loss")]
    NotEventuallyReachable,
    #[error("state became non-finite at t = {0}")]
    NonFiniteState(f64),
    #[error("control law is not well-defined: {0}")]
    NotWellDefined(String),
    #[error("range is degenerate: lower bound must be strictly below upper bound")]
    DegenerateRange,
    #[error("pi(t) fell below its floor at t = {0} with regularization disabled")]
    PiSingular(f64),
    #[error("no feasible guaranteed radius up to the search cap")]
    NoFeasibleMu,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 input error, 3 budget exceeded,
    /// 4 unsupported construction, 5 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::IndexOutOfRange { .. }
            | Error::DuplicateIndex(_)
            | Error::DegenerateRange
            | Error::NotUnitVector(_)
            | Error::ZeroDistance => 2,
            Error::CombinatorialBudgetExceeded { .. } => 3,
            Error::UnsupportedOrder(_) | Error::UnknownFixture(_) => 4,
            _ => 5,
        }
    }
}
