use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Feature dimension too small for the requested simplex.
    #[error("feature dimension {feature_dim} is too small for {num_classes} classes (need d >= C - 1)")]
    SimplexDimension { num_classes: usize, feature_dim: usize },

    /// A shape did not match what the operation expects.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A class label outside `[0, num_classes)`.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// Mean distance to the non-nearest centers vanished.
    #[error("degenerate uncertainty ratio: mean distance to other centers is {0:e}")]
    DegenerateDenominator(f64),

    /// Evaluation input lacks known or unknown samples.
    #[error("missing samples: {0}")]
    MissingSamples(&'static str),

    /// Any other invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
