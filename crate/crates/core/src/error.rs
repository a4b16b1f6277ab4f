//! Error type shared by the whole crate.

use std::path::PathBuf;

/// Errors produced by model construction, fitting, forecasting and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or argument violates a documented invariant.
    #[error("invalid {what}: {detail}")]
    Invalid { what: String, detail: String },

    /// A precondition on the input data does not hold (too few events,
    /// mismatched bin grids, corpus too small, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A numerical procedure failed to converge or became unstable.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The simulator exceeded its event cap; the configuration is
    /// effectively supercritical.
    #[error("simulation runaway: exceeded {max_events} events at t = {t:.3} h")]
    Runaway { max_events: usize, t: f64 },

    /// A model branch the closed forms do not cover.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed content in a data file.
    #[error("parse error in {path}, line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A file declares a schema version this build does not understand.
    #[error("unsupported schema version {found} in {path} (supported: {supported})")]
    Schema {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    /// Underlying I/O failure, with the path that was being accessed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
