use thiserror::Error;

pub type Result<T, E = RbbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RbbError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("explicit loads sum to {got}, expected {expected} balls")]
    BallsMismatch { expected: u64, got: u64 },

    #[error("ball count {0} exceeds the supported cap of 2^40")]
    TooManyBalls(u64),

    #[error("coupling precondition violated at bin {bin}: x = {x} > y = {y}")]
    DominanceViolated { bin: usize, x: u64, y: u64 },

    #[error("{what} requires {size} entries, above the cap of {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },

    #[error("range [{t0}, {t1}] is not inside the trace")]
    RangeViolation { t0: u64, t1: u64 },

    #[error("exponential potential overflows f64 (alpha * max_load = {0})")]
    Overflow(f64),

    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("nothing to plot")]
    EmptyInput,

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
