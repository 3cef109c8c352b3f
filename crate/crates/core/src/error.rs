use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Hermitian symmetry violated at frequency {frequency:?} (deviation {deviation:.3e})")]
    SymmetryViolation { frequency: Vec<i64>, deviation: f64 },

    #[error("spectral support violation: mode {frequency:?} outside radius {radius}")]
    SupportViolation { frequency: Vec<i64>, radius: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("time grid mismatch: {0}")]
    TimeGrid(String),

    #[error("seed mismatch: {0}")]
    SeedMismatch(String),

    #[error("explosion before horizon at t = {time}")]
    Exploded { time: f64 },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
