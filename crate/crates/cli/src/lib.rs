//! Command-line pipeline around `bloch-core`: bands, hoppings, drift predictions, exact
//! evolution and comparison plots, driven by a line-based configuration file.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod model;
pub mod svg;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Classify a library error raised while acting on `context`.
    pub fn from_core(context: &str, err: bloch_core::Error) -> Self {
        use bloch_core::Error as E;
        let message = format!("{context}: {err}");
        match err {
            E::NonRealTransform { .. } | E::BoundaryMass { .. } | E::ZeroNorm => {
                CliError::Numerical(message)
            }
            _ => CliError::Config(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
