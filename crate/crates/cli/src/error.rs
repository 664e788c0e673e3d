// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// TOML syntax or type error; `message` carries line, column and key.
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },

    /// Every problem found while validating a parsed config.
    #[error("{origin}: invalid config:\n  {}", .problems.join("\n  "))]
    Invalid {
        origin: String,
        problems: Vec<String>,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Physics(#[from] vflux_core::Error),

    #[error("golden: {0}")]
    Golden(String),
}

impl CliError {
    /// Process exit code: 2 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Invalid { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
