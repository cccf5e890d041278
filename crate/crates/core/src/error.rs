use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("update exponent {exponent} exceeds the overflow guard; eta is likely mis-tuned")]
    ExpOverflow { exponent: f64 },

    #[error("round {round}: delay {delay} reaches past the horizon {horizon}")]
    DelayPastHorizon {
        round: usize,
        delay: usize,
        horizon: usize,
    },

    #[error("round {round}: memory length {length} exceeds {max}")]
    MemoryTooLong {
        round: usize,
        length: usize,
        max: usize,
    },

    #[error("round {round}: expected {expected} arrived gradients, found {found}")]
    BucketMismatch {
        round: usize,
        expected: usize,
        found: usize,
    },

    #[error("round {round}: unary gradient norm {norm} exceeds the declared bound {bound}")]
    GradientBound { round: usize, norm: f64, bound: f64 },

    #[error("rounds must be supplied in order: expected {expected}, found {found}")]
    OutOfOrder { expected: usize, found: usize },

    #[error("round {round} is outside the horizon {horizon}")]
    PastHorizon { round: usize, horizon: usize },

    #[error("length mismatch: expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
