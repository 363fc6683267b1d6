//! Error and result types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer dimensions do not line up.
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// An argument violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Two path points that must be distinct coincide.
    #[error("degenerate path: points {i} and {j} coincide")]
    DegeneratePath { i: usize, j: usize },

    /// An energy field was asked for a capability it does not provide.
    #[error("energy field does not support {0}")]
    MissingCapability(&'static str),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A checkpoint file is malformed.
    #[error("checkpoint format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A pair endpoint does not carry the expected predicted class.
    #[error("pair rejected: endpoint {endpoint} predicted class {found}, expected {expected}")]
    RejectedPair {
        endpoint: u8,
        expected: usize,
        found: usize,
    },

    /// Pair sampling hit its rejection budget.
    #[error("pair sampling exhausted after {attempts} rejected draws")]
    ResamplingExhausted { attempts: usize },

    /// Invalid or unresolvable experiment configuration.
    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
