// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Steady-state heat transport through a V-type three-level system coupled
//! to two leads and a middle bath.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: parameters, validation, transition rates and their
//!   counting-field dressing;
//! * [`liouvillian`]: the 5×5 generator of the population/coherence block;
//! * [`steady`]: null-space, closed-form and time-integrated steady states;
//! * [`fcs`]: cumulant generating function and cumulants;
//! * [`transport`]: heat and particle currents and their closed forms;
//! * [`analysis`]: rectification and amplification figures of merit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fcs;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod presets;
pub mod steady;
pub mod transport;

pub use analysis::{
    amplification, cyclic_amplification_analytic, max_amplification, max_rectification,
    rectification, AmplificationMax, AmplificationResult, RectificationMax, RectificationResult,
};
pub use error::{Error, Result};
pub use fcs::{
    cumulants_finite_difference, cumulants_perturbative, dominant_eigenvalue,
    first_cumulant_direct, pseudo_inverse_r, CumulantMethod, CumulantSet,
};
pub use liouvillian::{
    build_counting_generator, build_generator, generator_chi_derivative, verify_block_decoupling,
    Generator, StateVector,
};
pub use model::{
    bose_occupation, build_rates, dress_rates, validate, validate_with, Bath, Channel,
    CountingFields, CountingKind, DressedRateSet, Level, RateSet, SystemSpec, ValidationMode,
    Violation,
};
pub use steady::{
    coherence_vanishing_residual, evolve, solve_steady, steady_state, steady_state_analytic,
    steady_state_no_interference, steady_state_relaxed, steady_state_resonant_two_bath,
    steady_state_three_terminal, Evolution, SteadyMethod, SteadyState,
};
pub use transport::{
    closed_form_je_r_resonant, closed_form_jr_no_interference, current_report, heat_currents,
    noise_power, particle_currents, CurrentReport, Flows, NoisePower,
};
