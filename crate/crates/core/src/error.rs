use alloc::string::String;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("expected {expected} channel(s), found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("wrong frame count: expected {expected}, found {found}")]
    FrameCount { expected: usize, found: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::Error::Dimension(alloc::format!($($arg)*))
    };
}

macro_rules! param_err {
    ($($arg:tt)*) => {
        $crate::Error::Parameter(alloc::format!($($arg)*))
    };
}

pub(crate) use dim_err;
pub(crate) use param_err;
