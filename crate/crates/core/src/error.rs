use thiserror::Error;

/// Errors surfaced by the petrel core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("truncation l_max={l_max} exceeds the anti-aliasing bound {bound} for n_lat={n_lat}")]
    TruncationBound {
        l_max: usize,
        bound: usize,
        n_lat: usize,
    },

    #[error("grid dimensions must be even, got {n_lat}x{n_lon}")]
    OddDimensions { n_lat: usize, n_lon: usize },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("registry error: {0}")]
    Registry(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("tracker error: {0}")]
    Track(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
