use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point has a non-finite coordinate at index {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("point has no coordinates")]
    EmptyPoint,

    #[error("tie-break value {value} is outside [0, 1]")]
    TieBreakOutOfRange { value: f64 },

    #[error("label {value} is not binary")]
    NonBinaryLabel { value: u8 },

    #[error("k = {k} exceeds pool size {pool}")]
    KTooLarge { k: usize, pool: usize },

    #[error("empty sample pool")]
    EmptyPool,

    #[error("c_delta undefined: need k > 4 ln(2/delta), got k = {k}, 4 ln(2/delta) = {threshold}")]
    CDeltaUndefined { k: usize, threshold: f64 },

    #[error("k-enlargement {k_bar} >= n = {n}: region construction precondition violated")]
    KBarTooLarge { k_bar: usize, n: usize },

    #[error("invalid hyper-parameter: {0}")]
    InvalidParams(String),

    #[error("point {0:?} is outside the support of the distribution")]
    OutOfSupport(Vec<f64>),

    #[error("ball of radius {radius} around the query has zero mass")]
    ZeroMassBall { radius: f64 },

    #[error("rejection sampling stalled: {proposals} proposals produced only {accepted} of {wanted} accepted samples")]
    RejectionStalled {
        proposals: usize,
        accepted: usize,
        wanted: usize,
    },

    #[error("label budget exhausted: cap {cap} reached")]
    LabelBudgetExhausted { cap: usize },

    #[error("empty witness pool")]
    EmptyWitnessPool,

    #[error("shattering search supports dim <= 2, got {0}")]
    UnsupportedDimension(usize),

    #[error("{0}")]
    Invalid(String),
}
