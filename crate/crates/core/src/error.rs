// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid system spec: {}", format_violations(.0))]
    InvalidSpec(Vec<Violation>),

    #[error("degenerate steady state: {0}")]
    DegenerateSteadyState(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("ambiguous eigenvalue branch: {0}")]
    Branch(String),

    #[error("rectification factor is indeterminate: {0}")]
    IndeterminateRectification(String),

    #[error("amplification factor is indeterminate: {0}")]
    IndeterminateAmplification(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
