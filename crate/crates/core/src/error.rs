use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("value is not finite: {0}")]
    NonFinite(f64),

    #[error("cell value {value} does not have digit length 1")]
    NotSingleDigit { value: f64 },

    #[error("digit length {0} is outside 0..=16")]
    DigitLengthOutOfRange(u8),

    #[error("unsupported major tick count {0} (expected 3, 6 or 11)")]
    TickCount(usize),

    #[error("degenerate axis: table has no positive maximum")]
    DegenerateAxis,

    #[error("range transformation requires the 6-tick base axis of an untransformed table")]
    AlreadyShifted,

    #[error("minor tick estimate must be positive, got {0}")]
    NonPositiveTick(f64),

    #[error("cannot parse number from {token:?}")]
    Parse { token: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("mean of counts is zero")]
    ZeroMean,

    #[error("hint prompt requires the item's y-axis ticks")]
    MissingAxis,
}
