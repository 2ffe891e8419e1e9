//! Configuration, experiment orchestration and file output for the
//! `flexpos` command-line tool. Numerics live in `flexpos-core`.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Config, ConfigError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const USAGE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] flexpos_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad input data: {0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Data(_) => exit::CONFIG,
            Error::Core(e) if e.is_numerical() => exit::NUMERICAL,
            Error::Core(_) => exit::CONFIG,
            Error::Io { .. } => exit::IO,
            Error::Usage(_) => exit::USAGE,
        }
    }
}
