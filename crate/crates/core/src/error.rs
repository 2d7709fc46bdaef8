use std::fmt;

/// One violated invariant of a parameter record.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{function}: {name}={value} is outside the domain")]
    Domain {
        function: &'static str,
        name: &'static str,
        value: f64,
    },

    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("numerical integrity check failed: {quantity} = {value:e} ({detail})")]
    Integrity {
        quantity: &'static str,
        value: f64,
        detail: String,
    },

    #[error("full-signal SNR needs per-phase noise draws")]
    MissingNoise,
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, name: &'static str, value: f64) -> Error {
    Error::Domain {
        function,
        name,
        value,
    }
}
