use thiserror::Error;

/// Errors shared by every module of the crate.
///
/// Variant names double as the machine-readable error codes emitted by the
/// CLI (`{"error": "<code>", "detail": ...}`).
#[derive(Debug, Error)]
pub enum Error {
    /// Two values belong to different base rings.
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    /// Exact division by a power of the uniformizer failed.
    #[error("not divisible: {0}")]
    NotDivisible(String),

    /// An inversion was requested for a non-unit.
    #[error("not a unit: {0}")]
    NotAUnit(String),

    /// Substitution target has no sound precision window.
    #[error("illegal substituend: {0}")]
    IllegalSubstituend(String),

    /// An iterative construction ran out of precision digits.
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    /// A coefficient outside the known window of a series was needed.
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    /// A rational coefficient exceeded its declared denominator budget.
    #[error("denominator budget exceeded: {0}")]
    DenominatorBudgetExceeded(String),

    /// The Frobenius series fails one of its two defining congruences.
    #[error("bad frobenius: {0}")]
    BadFrobenius(String),

    /// A base ring description is inconsistent.
    #[error("bad spec: {0}")]
    BadSpec(String),

    /// The norm operator failed its build-time oracle identities.
    #[error("norm oracle failed: {0}")]
    NormOracleFailed(String),

    /// A value was not in the image of the operator being inverted.
    #[error("not in operator image: {0}")]
    NotInImage(String),

    /// Malformed input document.
    #[error("bad input: {0}")]
    BadInput(String),
}

impl Error {
    /// Short machine-readable code for CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SpecMismatch(_) => "SpecMismatch",
            Error::NotDivisible(_) => "NotDivisible",
            Error::NotAUnit(_) => "NotAUnit",
            Error::IllegalSubstituend(_) => "IllegalSubstituend",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::WindowTooSmall(_) => "WindowTooSmall",
            Error::DenominatorBudgetExceeded(_) => "DenominatorBudgetExceeded",
            Error::BadFrobenius(_) => "BadFrobenius",
            Error::BadSpec(_) => "BadSpec",
            Error::NormOracleFailed(_) => "NormOracleFailed",
            Error::NotInImage(_) => "NotInImage",
            Error::BadInput(_) => "BadInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
