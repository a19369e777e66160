use valguard::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration or command line is unusable. The message starts
    /// with the offending field path.
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core { source, .. } => match source {
                Error::InvalidArgument(_) => EXIT_CONFIG,
                Error::Io { .. } | Error::Data(_) | Error::Shape(_) | Error::InfeasibleSplit(_) => {
                    EXIT_DATA
                }
                Error::Degenerate(_) | Error::EmptySelection => EXIT_DEGENERATE,
            },
        }
    }
}

/// Attaches a config path or step name to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for valguard::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
