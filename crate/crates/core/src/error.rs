use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value violates a type invariant. `field` is a dotted path such as
    /// `spectrum.S_H` so front ends can point at the offending input.
    #[error("invalid `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The compressed cross-spectral density could not be inverted at a
    /// frequency that was declared active.
    #[error("singular cross-spectral density at f = {frequency} Hz (condition number {condition:e})")]
    SingularCsd { frequency: f64, condition: f64 },

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the field path of an [`Error::InvalidInput`] with `section`.
    pub fn in_section(self, section: &str) -> Self {
        match self {
            Error::InvalidInput { field, reason } => Error::InvalidInput {
                field: format!("{section}.{field}"),
                reason,
            },
            other => other,
        }
    }
}

pub(crate) fn ensure_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}
