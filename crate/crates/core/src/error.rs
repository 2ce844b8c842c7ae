use thiserror::Error;

/// Errors raised across the library. Variants mirror the error kinds of the
/// public operations so callers can match on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: expected 1, 2 or 3")]
    InvalidDimension(usize),
    #[error("invalid resolution {0}: expected a power of two in [4, 4096]")]
    InvalidResolution(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("inadmissible state: {0}")]
    InadmissibleState(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("entropy recovery failed: {0}")]
    RecoveryFailure(String),
    #[error("time step {dt} exceeds the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unresolvable scale: {0}")]
    UnresolvableScale(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
