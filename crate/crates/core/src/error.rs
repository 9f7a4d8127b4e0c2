use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tunable or configuration value is outside its permitted range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A linear system or transform is singular (collinear points, zero determinant).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// Two corner roles resolved to the same input point.
    #[error("cannot assign corner roles: {0}")]
    Ordering(String),

    /// Homogeneous mapping with a vanishing denominator.
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },

    #[error("scene composition failed: {0}")]
    Composition(String),

    #[error("image dimensions {width}x{height}x{channels} do not match buffer of {len} bytes")]
    BufferSize {
        width: usize,
        height: usize,
        channels: usize,
        len: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Malformed input record; `line` is 1-based.
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("evaluation error: {0}")]
    Report(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (paths, records, parameters,
    /// geometry) rather than an internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::BufferSize { .. } | Error::PointAtInfinity { .. })
    }
}
