use std::path::PathBuf;

/// Errors produced across the toolkit.
///
/// The variants are grouped by how a caller is expected to react: bad
/// input or configuration is the caller's fault, data/format errors point
/// at a file, and numeric errors mean training diverged.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("cannot encode character {ch:?} (line {line}): not in charset")]
    Encode { ch: char, line: usize },

    #[error("invalid unicode scalar value U+{0:04X}")]
    InvalidScalar(u32),

    #[error("alignment infeasible: {frames} frames cannot carry {required} CTC states")]
    Alignment { frames: usize, required: usize },

    #[error("loss function is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("non-finite value during training in {0}")]
    Numeric(String),

    #[error("incompatible format version: found {found}, expected {expected}")]
    Version { found: String, expected: String },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
