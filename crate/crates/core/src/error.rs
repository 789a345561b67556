use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A CSV header could not be mapped onto the requested columns.
    #[error("schema error: {0}")]
    Schema(String),

    /// A data row failed validation. `row` is 1-based, counting data rows after the header.
    #[error("row {row}: {message}")]
    Validation { row: usize, message: String },

    /// Data carries no usable information (no events, zero design, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("censoring calibration failed: {0}")]
    Calibration(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by the data rather than by how the caller invoked us.
    pub fn is_data_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::RankDeficient(_) | Error::Calibration(_)
        )
    }
}
