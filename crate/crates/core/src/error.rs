use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pattern lengths are not strictly increasing at scale {k} (ell_{prev} = ell_{k} = {ell})", prev = k - 1)]
    DegenerateScales { k: usize, ell: u64 },

    #[error("scale {k} overflows 64 bits ({what})")]
    Overflow { k: usize, what: &'static str },

    #[error("base-scale bias beta_{k}^(-1/2+eps) = {bias:.6} exceeds the clamp {clamp} and clamping is disabled")]
    BiasOverflow { k: usize, bias: f64, clamp: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scale {k} outside the table range [{lo}, {hi}]")]
    ScaleOutOfRange { k: usize, lo: usize, hi: usize },

    #[error("window holds {have} sites but evaluation needs at least {need}")]
    WindowTooShort { need: u64, have: u64 },

    #[error("position {t} outside the window [0, {len})")]
    PositionOutOfWindow { t: usize, len: usize },

    #[error("block [{a}, {b}) has an empty opening")]
    EmptyOpening { a: usize, b: usize },

    #[error("enumeration needs {calls} engine calls, budget is {limit}")]
    BudgetExceeded { calls: u128, limit: u128 },

    #[error("block sampler ran past {limit} bits without an occurrence")]
    RunawayLength { limit: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Input that fails a precondition, as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::PositionOutOfWindow { .. } | Error::EmptyOpening { .. } | Error::RunawayLength { .. }
        )
    }
}
