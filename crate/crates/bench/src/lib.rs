// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Benchmarks live in `benches/`; run them with `cargo bench -p vflux-bench`.
