use std::collections::BTreeMap;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value lies outside its allowed range. Codes are never
    /// clamped; the caller always sees this instead.
    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No offset code opened the bathtub at the requested threshold.
    /// The per-code width table is kept for reporting.
    #[error("offset calibration failed: every offset code gave a zero-width bathtub")]
    CalibrationFailed { widths: BTreeMap<u8, f64> },
}

impl Error {
    pub(crate) fn out_of_range(
        name: &'static str,
        value: impl ToString,
        range: &'static str,
    ) -> Self {
        Error::OutOfRange {
            name,
            value: value.to_string(),
            range,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by a bad configuration value rather than a
    /// measurement outcome.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::OutOfRange { .. } | Error::InvalidArgument(_))
    }
}
