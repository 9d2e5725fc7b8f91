use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("misaligned east/west streams at position {position}: {detail}")]
    Misaligned { position: usize, detail: String },

    #[error("archive {path}: line {line}: {msg}")]
    Archive {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no calibrator signal detected: {0}")]
    NoSignal(String),

    #[error("stage `{stage}` failed: {msg}")]
    Stage { stage: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
