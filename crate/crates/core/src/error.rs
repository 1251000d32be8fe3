use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("observable is not self-adjoint: imaginary part {0:e} of expectation")]
    SelfAdjointness(f64),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("sample {sample_index}{}: {source}", .particles.map(|n| format!(" (N = {n})")).unwrap_or_default())]
    Sample {
        sample_index: usize,
        particles: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_sample(self, sample_index: usize, particles: Option<usize>) -> Self {
        Error::Sample {
            sample_index,
            particles,
            source: Box::new(self),
        }
    }
}
