use crate::halfint::HalfInteger;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("safe shell is empty: word length {word_len} needs Lmax >= {needed}, have {lmax}")]
    EmptySafeShell {
        word_len: usize,
        needed: HalfInteger,
        lmax: HalfInteger,
    },

    #[error("structure-constant validation failed: `{identity}` has residual {residual:e}")]
    ValidationFailure { identity: String, residual: f64 },

    #[error("ladder level overflow: level {level} exceeds cap {cap}")]
    LevelOverflow { level: i64, cap: i64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate:e})")]
    NonConvergence { iterations: usize, last_estimate: f64 },

    #[error("trace tail {tail:e} exceeds tolerance {tolerance:e}")]
    TailTooLarge { tail: f64, tolerance: f64 },

    #[error("Laplace peak m* = {peak:.2} at t = {t} is not inside the truncation (2*Lmax = {lmax_doubled})")]
    PeakOutsideTruncation { t: f64, peak: f64, lmax_doubled: i64 },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
