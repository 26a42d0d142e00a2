use alloc::string::String;
use core::fmt;

/// Errors raised by the numeric core and the model contracts built on it.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// An operation was given tensors whose shapes do not conform.
    ShapeMismatch {
        op: &'static str,
        detail: String,
    },
    /// A contract precondition was violated (bad mask, bad one-hot, …).
    Contract {
        op: &'static str,
        detail: String,
    },
    /// An index was outside its permitted range.
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    /// A non-finite value appeared where the training contract forbids it.
    NonFinite {
        what: String,
    },
    /// Schema definition problems (empty domains, unknown slot in an
    /// overlap pair, …).
    Schema(String),
    /// A sequence exceeded the configured position-table capacity.
    Length {
        what: &'static str,
        len: usize,
        max: usize,
    },
    /// A checkpoint byte stream did not decode.
    Checkpoint(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in {op}: {detail}")
            }
            CoreError::Contract { op, detail } => {
                write!(f, "contract violation in {op}: {detail}")
            }
            CoreError::IndexOutOfRange { op, index, len } => {
                write!(f, "index {index} out of range (len {len}) in {op}")
            }
            CoreError::NonFinite { what } => write!(f, "non-finite value in {what}"),
            CoreError::Schema(msg) => write!(f, "schema error: {msg}"),
            CoreError::Length { what, len, max } => {
                write!(f, "{what} length {len} exceeds maximum {max}")
            }
            CoreError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;

pub(crate) fn shape_err(op: &'static str, detail: impl fmt::Display) -> CoreError {
    CoreError::ShapeMismatch {
        op,
        detail: alloc::format!("{detail}"),
    }
}

pub(crate) fn contract_err(op: &'static str, detail: impl fmt::Display) -> CoreError {
    CoreError::Contract {
        op,
        detail: alloc::format!("{detail}"),
    }
}
