// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Configuration ingestion, task runner, figure reproduction and the golden
//! regression corpus behind the `vflux` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod golden;
pub mod run;
pub mod table;

pub use config::{
    default_config, defaults_for, load_config, parse_config, Format, Options, ScenarioConfig,
    SweepAxis, Target, Task, DEFAULTS_TABLE, SCHEMA,
};
pub use error::{CliError, Result};
pub use golden::{check_case, load_manifest, regenerate_golden, GoldenCase, Outcome};
pub use run::{emit, reproduce, run, run_with_threads, sweep};
pub use table::{sha256_hex, Cell, Table};
