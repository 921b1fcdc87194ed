//! Configuration, presets and experiment pipelines for the `paraexp` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;

/// Failure classes with distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[source] paraexp::Error),
    #[error("divergence: {0}")]
    Diverged(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Diverged(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<paraexp::Error> for CliError {
    fn from(e: paraexp::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}
