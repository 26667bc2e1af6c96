use thiserror::Error;

use crate::taylor::MultiIndex;
use crate::Rational;

/// Errors from the exact stencil algebra, Taylor analysis and generators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StencilError {
    #[error("stencil dimension must be at least 1")]
    ZeroDim,
    #[error("scaling by zero annihilates the stencil")]
    ZeroScale,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("grid-spacing powers differ: h^{left} vs h^{right}")]
    PowerMismatch { left: i32, right: i32 },
    #[error("every coefficient cancelled")]
    EmptyStencil,
    #[error("truncation must be at least 1")]
    ZeroTruncation,
    #[error("all Taylor coefficients below order {trunc} vanish")]
    TruncationTooSmall { trunc: u32 },
    #[error("leading Taylor term is {leading} h^{h_exponent}, expected 1 h^0")]
    NotNormalized { leading: Rational, h_exponent: i32 },
    #[error("no error term below truncation order {trunc}")]
    AccuracyExceedsTruncation { trunc: u32 },
    #[error("several nonzero terms share the lowest order: {indices:?}")]
    MixedLeadingOrder { indices: Vec<MultiIndex> },
    #[error("term {index:?} is not a derivative of the leading term {leading:?}")]
    IncomparableTerm {
        index: MultiIndex,
        leading: MultiIndex,
    },
    #[error("composed accuracy {composed} contradicts the predicted {predicted}")]
    LemmaViolation { predicted: u32, composed: u32 },
    #[error("moment system is singular")]
    SingularSystem,
    #[error("unsupported accuracy {accuracy} for this stencil family")]
    UnsupportedAccuracy { accuracy: u32 },
    #[error("invalid stencil request: {0}")]
    InvalidSpec(String),
    #[error("invalid stencil JSON: {0}")]
    Json(String),
}
