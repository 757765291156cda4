use thiserror::Error;

use crate::boost::BoostError;
use crate::channels::ChannelError;
use crate::config::ConfigError;
use crate::detect::DetectError;
use crate::eval::EvalError;
use crate::filterbank::FilterError;
use crate::imgio::ImgIoError;
use crate::linstats::LinStatsError;

/// Crate-level error wrapping every module error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    ImgIo(#[from] ImgIoError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    LinStats(#[from] LinStatsError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by the command-line driver for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid configuration or arguments.
    Config,
    /// Input data is missing, malformed or unusable.
    Data,
    /// Numerical failure or anything unexpected.
    Internal,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::ImgIo(_) | Error::Io { .. } => ErrorKind::Data,
            Error::Eval(e) => match e {
                EvalError::InvalidConfig(_) => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
            Error::Channel(e) => match e {
                ChannelError::InvalidConfig(_) | ChannelError::InvalidFactor(_) => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
            Error::Filter(e) => match e {
                FilterError::KTooLarge { .. } | FilterError::InvalidConfig(_) => ErrorKind::Config,
                FilterError::LinStats(_) => ErrorKind::Internal,
                _ => ErrorKind::Data,
            },
            Error::Detect(e) => match e {
                DetectError::InvalidConfig(_) => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
            Error::Boost(e) => match e {
                BoostError::InvalidConfig(_) => ErrorKind::Config,
                BoostError::InvalidTrainingSet(_) | BoostError::EmptyPositives | BoostError::Format(_) => {
                    ErrorKind::Data
                }
                _ => ErrorKind::Internal,
            },
            Error::LinStats(_) => ErrorKind::Internal,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
