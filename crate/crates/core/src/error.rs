use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants map to failure categories so callers
/// (and the CLI) can report what class of problem occurred.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix expected to be symmetric is not, beyond tolerance.
    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),

    /// Matrix expected to be positive-definite is singular or indefinite.
    #[error("not positive-definite: {0}")]
    NotSpd(String),

    /// An SPD-manifold operation encountered a non-positive eigenvalue.
    #[error("manifold violation: {0}")]
    ManifoldViolation(String),

    /// Degenerate input: empty patch/region, zero-norm descriptor, zero-area image.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset/evaluation protocol violated (missing identities, empty gallery, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Not enough data to fit a model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Numerical failure that survived regularization retries.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed file contents (manifest rows, cache/model framing).
    #[error("format error: {0}")]
    Format(String),

    /// Caller broke an API contract (dimension mismatch, stale handles).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Short category tag used by the CLI for error reporting and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::SymmetryViolation(_) => "symmetry",
            Error::NotSpd(_) => "not-spd",
            Error::ManifoldViolation(_) => "manifold",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Protocol(_) => "protocol",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Numerical(_) => "numerical",
            Error::Format(_) => "format",
            Error::Contract(_) => "contract",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
        }
    }
}
