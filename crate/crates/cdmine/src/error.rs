//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by compression, bound computation and the mining drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed argument: bad length, out-of-range count, negative magnitude, ...
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects cannot be compared (basis, length or pairing mismatch).
    #[error("incompatible pair: {0}")]
    InvalidPair(String),

    /// Residual energy exceeds what the magnitude ceiling can absorb.
    #[error("infeasible energy: {0}")]
    InfeasibleEnergy(String),

    /// A precondition of an internal algorithm was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative scheme failed to converge within its iteration budget.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// Database file does not start with the expected magic bytes.
    #[error("bad magic: not a compressed database")]
    BadMagic,

    /// Database file ended before the declared payload was complete.
    #[error("truncated payload: expected {expected} more bytes")]
    Truncated { expected: usize },

    /// Database payload does not match its trailing CRC32.
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    /// Malformed record or CSV content.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
