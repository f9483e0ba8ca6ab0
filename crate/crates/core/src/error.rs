use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Least squares with no more samples than unknowns.
    #[error("underdetermined regression: {samples} samples for {unknowns} unknowns")]
    Underdetermined { samples: usize, unknowns: usize },

    #[error("degenerate source triangle {triangle} (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("detection count mismatch: expected {expected}, found {found}")]
    DetectionCount { expected: usize, found: usize },

    #[error("feature loss: expected {expected} dots, found {found}")]
    FeatureLoss { expected: usize, found: usize },

    #[error("degenerate configuration: interaction matrix rank {rank} < 6")]
    DegenerateConfiguration { rank: usize },

    #[error("no grasp contact found")]
    NoGrasp,

    #[error("equilibrium gap undefined: thumb mean {0:e} N")]
    UndefinedGap(f64),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
