use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps `Config`/`Input`/`Parse` to exit code 2 (usage errors) and
/// reserves exit code 1 for genuine property failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A graph or partition is malformed (dangling edge endpoint, self-loop,
    /// sides that do not partition the node set, ...).
    #[error("structural error: {0}")]
    Structure(String),

    /// A request exceeds the enumeration or scheduling limits this crate is
    /// sized for.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A scenario or protocol configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input artifact (trace, scenario file) does not match what it is
    /// checked against.
    #[error("input error: {0}")]
    Input(String),

    /// Textual input could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
