use thiserror::Error;

use crate::advantage::AdvantageError;
use crate::data::DataError;
use crate::detectors::DetectorError;
use crate::pca::PcaError;
use crate::qmeans::ClusterError;
use crate::qpca::QpcaError;
use crate::qsim::QsimError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error. Each module keeps its own error enum; this one only
/// aggregates them and adds the I/O and configuration failures of the
/// batch pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Qpca(#[from] QpcaError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Advantage(#[from] AdvantageError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI for exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Data(_) => "data",
            Error::Pca(_) => "pca",
            Error::Qsim(_) => "qsim",
            Error::Qpca(_) => "qpca",
            Error::Detector(_) => "detector",
            Error::Cluster(_) => "cluster",
            Error::Advantage(_) => "advantage",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
