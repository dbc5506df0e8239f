use std::fmt;

use rankdistill_core::Error as CoreError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration. Exit code 1.
    Usage(anyhow::Error),
    /// Unreadable, malformed or mismatched inputs. Exit code 2.
    Data(anyhow::Error),
    /// Non-finite values or divergence during training. Exit code 3.
    Numerical(anyhow::Error),
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::Data(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Usage(e) => Failure::Usage(e.context(ctx)),
            Failure::Data(e) => Failure::Data(e.context(ctx)),
            Failure::Numerical(e) => Failure::Numerical(e.context(ctx)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Numerical(e) => e,
        };
        write!(f, "{e:#}")
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.into())
        } else if matches!(e, CoreError::InvalidConfig(_)) {
            Failure::Usage(e.into())
        } else {
            Failure::Data(e.into())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

/// Attaches a path or other context to IO-like results.
pub trait DataContext<T> {
    fn data_ctx(self, ctx: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data_ctx(self, ctx: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| Failure::Data(e.into().context(ctx.to_string())))
    }
}
