use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ground set too small: n = {0}, need n >= 2")]
    TooFewItems(usize),

    #[error("loss vector violates the {regime} bound: norm {norm} > 1")]
    RegimeViolation { regime: &'static str, norm: f64 },

    #[error("items must be pairwise distinct")]
    RepeatedItems,

    #[error("item index {item} out of range for n = {n}")]
    ItemOutOfRange { item: usize, n: usize },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("coordinate {index} = {value} is not strictly inside (-1, 1)")]
    OutsideCube { index: usize, value: f64 },

    #[error("point is outside the rescaled permutahedron (violation {violation:e})")]
    OutsidePolytope { violation: f64 },

    #[error("root search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("exhaustive enumeration limited to n <= {max}, got n = {n}")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown adversary spec `{0}`")]
    UnknownAdversary(String),

    #[error("degenerate loss vector: {0}")]
    DegenerateLoss(String),

    #[error("observed loss {0} exceeds the dual-regime bound |loss| <= 1")]
    LossOutOfRange(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("zero matrix has an empty range")]
    ZeroMatrix,

    #[error("learner observed a loss without a pending action")]
    NoPendingAction,

    #[error("at step {step}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data for the regret fit: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::AtStep { .. } => self,
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }
}
