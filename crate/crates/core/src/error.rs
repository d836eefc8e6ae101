use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The arcsine argument of the phase-to-DOA inversion left [-1, 1].
    #[error("spatial aliasing: arcsine argument {0:.6} is outside [-1, 1]")]
    Domain(f64),

    #[error("{what}: need at least {need} samples, got {got}")]
    Length {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("expected {expected} spectral peaks, found {found}")]
    FewerPeaks { expected: usize, found: usize },

    #[error("rank-deficient system (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("support recovery found no energy above the noise floor")]
    EmptySupport,

    #[error("cannot estimate the frequency of an all-zero sequence")]
    ZeroSequence,

    #[error("residual frequency {value} Hz outside [0, {limit}) Hz")]
    Range { value: f64, limit: f64 },

    #[error("Fisher information matrix is singular")]
    Singular,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("{sources} sources need a matrix wider than its {rows} rows")]
    TooManySources { sources: usize, rows: usize },

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Step tag of the outermost [`Error::Step`] wrapper, if any.
    pub fn step(&self) -> Option<&'static str> {
        match self {
            Error::Step { step, .. } => Some(step),
            _ => None,
        }
    }

    /// Innermost error below any step tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait StepExt<T> {
    fn step(self, step: &'static str) -> Result<T>;
}

impl<T> StepExt<T> for Result<T> {
    fn step(self, step: &'static str) -> Result<T> {
        self.map_err(|e| Error::Step {
            step,
            source: Box::new(e),
        })
    }
}
