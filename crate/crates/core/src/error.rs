use std::path::PathBuf;

/// Errors raised by the particle dynamics, the objective catalog, the
/// approximation schemes and the experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid constants or distribution parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// Non-finite or otherwise malformed numerical input.
    #[error("data error: {0}")]
    Data(String),
    /// The objective returned a non-finite value.
    #[error("objective is not finite at x = {x:?}")]
    NonFiniteObjective { x: Vec<f64> },
    /// An Euler-Maruyama update produced a non-finite coordinate.
    #[error("numerical blow-up at step {step}, particle {particle}")]
    Blowup { step: usize, particle: usize },
    /// The random law cannot be used by the requested scheme.
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
    /// A request that would exhaust memory or time budgets.
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Failure inside a replication, tagged with the loop indices.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
