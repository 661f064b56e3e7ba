use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a probability vector: max negative entry {max_negative:e}, |sum - 1| = {sum_deviation:e}")]
    InvalidProbability { max_negative: f64, sum_deviation: f64 },

    #[error("not column-stochastic: max negative entry {max_negative:e}, max |column sum - 1| = {max_column_deviation:e}")]
    NotStochastic {
        max_negative: f64,
        max_column_deviation: f64,
    },

    #[error("not a rate matrix: min off-diagonal {min_off_diagonal:e}, max |column sum| = {max_column_sum:e}")]
    InvalidRateMatrix {
        min_off_diagonal: f64,
        max_column_sum: f64,
    },

    #[error("kernel with equal endpoints must be the identity (deviation {deviation:e})")]
    NonIdentityAtEqualTimes { deviation: f64 },

    #[error("kernel times do not chain: earlier ends at {earlier_to}, later starts at {later_from}")]
    TimeMismatch { earlier_to: f64, later_from: f64 },

    #[error("time grid must be strictly increasing")]
    InvalidGrid,

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("step size too large: epsilon = {epsilon} gives a non-stochastic one-step kernel")]
    StepTooLarge { epsilon: f64 },

    #[error("map is not trace preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },

    #[error("map is not completely positive (min Choi eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("not a density operator: {0}")]
    InvalidDensity(String),

    #[error("operator is not diagonal (off-diagonal mass {mass:e})")]
    NotDiagonal { mass: f64 },

    #[error("effects do not form a POVM: {0}")]
    InvalidPovm(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("family cannot be evaluated at t = {t}, s = {s}: {reason}")]
    Evaluation { t: f64, s: f64, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}
