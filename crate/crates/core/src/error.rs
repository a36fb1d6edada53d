use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model evaluation produced a non-finite {what} component {index} at x = {x:?}")]
    ModelEvaluation {
        what: &'static str,
        index: usize,
        x: Vec<f64>,
    },

    #[error("mollification failed: {0}")]
    Mollification(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("blow-up: particle {particle} became non-finite at t = {time}")]
    BlowUp { particle: usize, time: f64 },

    #[error("diffusion right inverse violated: |g| = {value:.3e} < g_min = {g_min:.3e} on mode {mode} at t = {time}")]
    RightInverse {
        mode: usize,
        value: f64,
        g_min: f64,
        time: f64,
    },

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("observable is not centered: (phi, mu*) = {mean:.4e} exceeds tolerance {tol:.4e}")]
    Centering { mean: f64, tol: f64 },

    #[error("statistical power: {0}")]
    StatisticalPower(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
