use thiserror::Error;

/// Library-level error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("unsupported derivative order {0} (must be 1..=4)")]
    UnsupportedOrder(u32),

    #[error("eps = {0} outside the admissible range [0, 1/2]")]
    EpsOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent half-line integral (term x^{power} e^{rate}x)")]
    DivergentIntegral { power: u32, rate: f64 },

    #[error("resolvent parameter lambda = {0} must be positive")]
    LambdaOffSpectrum(f64),

    #[error("boundary-value oracle out of range: eps*lambda = {0} (supported (0, 1e4])")]
    OracleOutOfRange(f64),

    #[error("solution blew up at tau = {tau}")]
    BlowUp { tau: f64 },

    #[error("trajectories have mismatched sampling")]
    MismatchedSampling,

    #[error("too few snapshots: need at least {needed}, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("comparison solution blows up immediately at every tested eps")]
    ImmediateBlowUp,

    #[error("invalid initial-condition spec: {0}")]
    InvalidIc(String),

    #[error("trace oracle disagreement: {0}")]
    OracleDisagreement(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
