use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the model, the optimisers and the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must agree on a dimension do not.
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A probability vector or table is malformed.
    InvalidDistribution { what: &'static str, deviation: f64 },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// A cost entry lies outside `[-1, 1]`.
    CostOutOfRange { value: f64 },
    /// A NaN or infinite value reached an operation that requires finite input.
    NonFinite { what: &'static str },
    /// The linear system `(I - gamma P)` could not be solved.
    Singular,
    /// An iterative projection did not reach feasibility.
    ProjectionFailed { residual: f64 },
    /// The linear maximisation oracle did not converge.
    LmoFailed { residual: f64 },
    /// A multiplier left the range allowed by the dual configuration.
    DualBound { index: usize, value: f64, bound: f64 },
    /// One of the multiplier invariants was violated.
    MultiplierInvariant { property: u8, index: usize, value: f64 },
    /// Failure inside a macro-iteration of the training loop.
    MacroIteration { k: usize, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            found,
        }
    }

    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    /// True for errors that come from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular
            | Error::ProjectionFailed { .. }
            | Error::LmoFailed { .. }
            | Error::NonFinite { .. }
            | Error::DualBound { .. }
            | Error::MultiplierInvariant { .. } => true,
            Error::MacroIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            Error::InvalidDistribution { what, deviation } => {
                write!(f, "{what} is not a valid distribution (deviation {deviation:e})")
            }
            Error::InvalidParameter {
                name,
                value,
                reason,
            } => write!(f, "invalid {name} = {value}: {reason}"),
            Error::CostOutOfRange { value } => {
                write!(f, "cost entry {value} outside [-1, 1]")
            }
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::Singular => write!(f, "singular Bellman system"),
            Error::ProjectionFailed { residual } => {
                write!(f, "projection did not converge (residual {residual:e})")
            }
            Error::LmoFailed { residual } => {
                write!(f, "linear maximisation oracle did not converge (residual {residual:e})")
            }
            Error::DualBound { index, value, bound } => {
                write!(f, "multiplier {index} = {value} exceeds bound {bound}")
            }
            Error::MultiplierInvariant {
                property,
                index,
                value,
            } => write!(
                f,
                "multiplier property {property} violated for constraint {index} (value {value:e})"
            ),
            Error::MacroIteration { k, source } => {
                write!(f, "macro-iteration {k}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {}
