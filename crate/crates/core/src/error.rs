use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("transition row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("transition entry ({row}, {col}) = {value} is not a probability")]
    InvalidTransition { row: usize, col: usize, value: f64 },
    #[error("terminal state {0} must be absorbing with zero reward")]
    NonAbsorbingTerminal(usize),
    #[error("discount {0} must lie in [0, 1)")]
    BadDiscount(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("Bellman system is numerically singular")]
    SingularSystem,
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("start state {0} is terminal")]
    StartTerminal(usize),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("time index {t} out of range for trajectory of length {len}")]
    TimeOutOfRange { t: usize, len: usize },
    #[error("weight sequence tail does not vanish; n-step weights are undefined")]
    NonVanishingTail,
    #[error("weight tail ratio {0} is unsupported by this operation")]
    UnsupportedTail(f64),
    #[error("no closed-form modulus for {0}")]
    UnsupportedFamily(String),
    #[error("expected exactly two non-terminal states, found {0}")]
    WrongStateCount(usize),
    #[error("{0} is not a convex return; the variance bound does not apply")]
    NonConvexSpec(String),
    #[error("behavior probability at index {0} is not positive")]
    ZeroBehaviorProbability(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
