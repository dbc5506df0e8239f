use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{kind} id {id} out of range (count {count})")]
    IdOutOfRange { kind: &'static str, id: usize, count: usize },

    #[error("user {user} has interacted with every item; no negatives available")]
    NoNegatives { user: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("not enough observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },
}

impl Error {
    /// Errors raised by numerical failure rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Diverged { .. })
    }
}
