use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("out of domain: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no informative source: all trust expectations are zero")]
    NoInformativeSource,
    #[error("packet decode failed at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("frame {frame} (t={time:.2}s), agent {agent}: {source}")]
    Frame {
        frame: usize,
        time: f64,
        agent: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
