use thiserror::Error;

/// Everything that can go wrong between reading a config and writing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("pulses overlap: {0}")]
    Overlap(String),

    #[error("pulse not resolvable on the time grid: {0}")]
    Resolution(String),

    #[error("burn: {0}")]
    Burn(String),

    #[error("no spectral hole (dip depth {depth:e})")]
    NoHole { depth: f64 },

    #[error("integrator unstable at slice {slice}, step {step} (t = {t_us} us): {detail}")]
    Instability {
        slice: usize,
        step: usize,
        t_us: f64,
        detail: String,
    },

    #[error("coupling calibration failed: {0}")]
    Calibration(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 numeric instability, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::Config(_)
            | Error::Grid(_)
            | Error::Overlap(_)
            | Error::Resolution(_)
            | Error::Burn(_)
            | Error::LengthMismatch { .. } => 2,
            Error::Instability { .. } | Error::Calibration(_) => 3,
            Error::NoHole { .. } | Error::Analysis(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any scenario context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
