use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input value was outside the operation's domain.
    InvalidInput(String),
    /// Two objects that must agree in size did not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// The Gram matrix lost positive definiteness during orthonormalization.
    SingularGram { index: usize, residual: f64 },
    /// A simulated path produced a non-finite state.
    NonFiniteState { step: usize },
    /// `exp(∫c)` overflowed; the potential is too large for the horizon.
    ExpOverflow { step: usize },
    /// A loss evaluation returned a non-finite value.
    NonFiniteLoss { record: usize },
    /// Training loss crossed the divergence threshold.
    Diverged { epoch: usize, loss: f64 },
    /// A failure while producing a specific dataset record.
    AtRecord { index: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            Error::SingularGram { index, residual } => write!(
                f,
                "gram matrix numerically singular at basis index {index} (residual norm² {residual:e})"
            ),
            Error::NonFiniteState { step } => {
                write!(f, "simulation produced a non-finite state at step {step}")
            }
            Error::ExpOverflow { step } => write!(
                f,
                "exponential of the potential integral overflowed at step {step}"
            ),
            Error::NonFiniteLoss { record } => {
                write!(f, "non-finite loss at batch record {record}")
            }
            Error::Diverged { epoch, loss } => {
                write!(f, "training diverged in epoch {epoch} (loss {loss:e})")
            }
            Error::AtRecord { index, source } => write!(f, "record {index}: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::AtRecord { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl Error {
    /// Wraps an error with the index of the record that produced it.
    pub fn at_record(index: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtRecord {
            index,
            source: Box::new(e),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what,
            expected,
            found,
        })
    }
}
