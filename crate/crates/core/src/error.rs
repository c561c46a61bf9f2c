use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter combination that the operation refuses to run with.
    #[error("configuration error: {0}")]
    Config(String),

    /// Requested fixed-point precision is too coarse for the harmonic index.
    #[error("precision inadequate for harmonic {m}: need at least {required_bits} bits, got {bits}")]
    Precision { m: i64, bits: u32, required_bits: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// `F - G_j` has no sign change on the domain.
    #[error("no crossing between F and G_{index} on the domain")]
    NoCrossing { index: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
