// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Steady-state heat and particle currents.
//!
//! Sign convention: a positive current flows into the named bath.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fcs::{cumulants_finite_difference, cumulants_perturbative, DEFAULT_FD_STEP};
use crate::liouvillian::{build_generator, StateVector};
use crate::model::{
    bose_occupation, validate_with, Bath, Channel, CountingKind, Level, SystemSpec, ValidationMode,
};
use crate::steady::{steady_state, SteadyState};

/// Conservation residuals above this value are reported as violations.
pub const CONSERVATION_TOL: f64 = 1e-10;

/// Currents into the left, right and middle baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flows {
    pub left: f64,
    pub right: f64,
    pub middle: f64,
}

impl Flows {
    pub fn lead(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Left => self.left,
            Bath::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentReport {
    pub energy: Flows,
    pub particle: Flows,
    /// Energy noise power into the right lead.
    pub noise_rr: f64,
    /// `|JeL + JeR + JeM|`
    pub energy_residual: f64,
    /// `|JpL + JpR|`
    pub particle_residual: f64,
}

impl CurrentReport {
    pub fn conserves(&self) -> bool {
        self.energy_residual <= CONSERVATION_TOL && self.particle_residual <= CONSERVATION_TOL
    }
}

/// Thermal occupations entering one lead's current, at the two levels.
fn lead_occupations(spec: &SystemSpec, bath: Bath) -> Result<[f64; 2]> {
    let t = spec.temperature(bath);
    let mut n = [0.0; 2];
    for level in Level::BOTH {
        let omega = spec.level(level);
        // A level at zero energy carries no energy; its rate is never used.
        if omega > 0.0 {
            n[level.index()] = bose_occupation(omega, t)?;
        }
    }
    Ok(n)
}

/// Current into `bath` with each transition weighted by `weight(level)`.
fn lead_flow(
    spec: &SystemSpec,
    bath: Bath,
    state: &StateVector,
    weight: impl Fn(Level) -> f64,
) -> Result<f64> {
    let n = lead_occupations(spec, bath)?;
    let pops = [state.rho11().re, state.rho22().re];
    let gg = state.rhogg().re;
    let g12 = spec.coupling(bath, Channel::C12);
    let mut total = 0.0;
    for level in Level::BOTH {
        let j = level.index();
        let diag = match level {
            Level::E1 => Channel::C11,
            Level::E2 => Channel::C22,
        };
        let g = spec.coupling(bath, diag);
        let w = weight(level);
        if g != 0.0 {
            total += w * g * ((1.0 + n[j]) * pops[j] - n[j] * gg);
        }
        if g12 != 0.0 {
            total += 0.5 * w * g12 * (1.0 + n[j]) * state.coherence_sum();
        }
    }
    Ok(total)
}

fn middle_flow(spec: &SystemSpec, state: &StateVector, quantum: f64) -> Result<f64> {
    if spec.g_m == 0.0 {
        return Ok(0.0);
    }
    let n = bose_occupation(spec.delta(), spec.temp_m)?;
    Ok(quantum * spec.g_m * ((1.0 + n) * state.rho11().re - n * state.rho22().re))
}

/// Heat currents evaluated on a given state.
pub fn heat_currents_from_state(spec: &SystemSpec, state: &StateVector) -> Result<Flows> {
    let energy = |l: Level| spec.level(l);
    Ok(Flows {
        left: lead_flow(spec, Bath::Left, state, energy)?,
        right: lead_flow(spec, Bath::Right, state, energy)?,
        middle: middle_flow(spec, state, spec.delta())?,
    })
}

/// Particle currents evaluated on a given state.
pub fn particle_currents_from_state(spec: &SystemSpec, state: &StateVector) -> Result<Flows> {
    Ok(Flows {
        left: lead_flow(spec, Bath::Left, state, |_| 1.0)?,
        right: lead_flow(spec, Bath::Right, state, |_| 1.0)?,
        middle: middle_flow(spec, state, 1.0)?,
    })
}

fn solve(spec: &SystemSpec) -> Result<SteadyState> {
    steady_state(&build_generator(spec)?)
}

/// Heat currents on the null-space steady state.
pub fn heat_currents(spec: &SystemSpec) -> Result<Flows> {
    heat_currents_from_state(spec, &solve(spec)?.state)
}

/// Particle currents on the null-space steady state.
pub fn particle_currents(spec: &SystemSpec) -> Result<Flows> {
    particle_currents_from_state(spec, &solve(spec)?.state)
}

/// Second cumulant of a counted flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisePower {
    /// Projected-resolvent value, the reported one.
    pub value: f64,
    /// Finite-difference value at the default step, kept as a diagnostic.
    pub finite_difference: Option<f64>,
}

pub fn noise_power(spec: &SystemSpec, bath: Bath, kind: CountingKind) -> Result<NoisePower> {
    let value = cumulants_perturbative(spec, bath, kind, 2)?.values[1];
    let finite_difference = cumulants_finite_difference(spec, bath, kind, 2, DEFAULT_FD_STEP)
        .ok()
        .map(|c| c.values[1]);
    Ok(NoisePower {
        value,
        finite_difference,
    })
}

/// `JeL + JeR + JeM` implied by the generator on `state`.
///
/// The lead currents weight the interference term with `εj Γ⁻12(εj)`, while
/// the system loses `ε1 Γ⁻12(ε2) + ε2 Γ⁻12(ε1)` through it. The sum of all
/// heat currents is therefore `½(ρ12 + ρ21) Δ [Γ⁻12(ε1) − Γ⁻12(ε2)]`, zero
/// at resonance or without interference.
pub fn energy_balance_defect(spec: &SystemSpec, state: &StateVector) -> Result<f64> {
    let mut loss = [0.0; 2];
    for bath in Bath::BOTH {
        let g12 = spec.coupling(bath, Channel::C12);
        if g12 == 0.0 {
            continue;
        }
        let n = lead_occupations(spec, bath)?;
        for j in 0..2 {
            loss[j] += g12 * (1.0 + n[j]);
        }
    }
    Ok(0.5 * state.coherence_sum() * spec.delta() * (loss[0] - loss[1]))
}

/// Full report: currents, right-lead energy noise, conservation residuals.
pub fn current_report(spec: &SystemSpec) -> Result<CurrentReport> {
    let ss = solve(spec)?;
    let energy = heat_currents_from_state(spec, &ss.state)?;
    let particle = particle_currents_from_state(spec, &ss.state)?;
    let noise_rr = cumulants_perturbative(spec, Bath::Right, CountingKind::Energy, 2)?.values[1];
    Ok(CurrentReport {
        energy,
        particle,
        noise_rr,
        energy_residual: (energy.left + energy.right + energy.middle).abs(),
        particle_residual: (particle.left + particle.right).abs(),
    })
}

/// Closed-form right-lead heat current at resonance with equal diagonal
/// couplings `γ` and no middle bath.
///
/// Population part `2εγ(Γ⁻γ − Γ⁻12 γL12)(nL − nR)/𝒜` plus coherence part
/// `2εγ γR12(γL12 − γR12)(1 + nR)(nL − nR)/𝒜`.
pub fn closed_form_je_r_resonant(spec: &SystemSpec) -> Result<f64> {
    let g = spec.g_l11;
    let equal = [spec.g_l22, spec.g_r11, spec.g_r22].iter().all(|&x| x == g);
    if spec.eps1 != spec.eps2 || spec.g_m != 0.0 || !equal {
        return Err(Error::Usage(
            "resonant closed form needs eps1 == eps2, gM == 0 and equal diagonal couplings".into(),
        ));
    }
    reject_invalid(spec, ValidationMode::Strict)?;
    let eps = spec.eps1;
    let nl = bose_occupation(eps, spec.temp_l)?;
    let nr = bose_occupation(eps, spec.temp_r)?;
    let (gl, gr) = (spec.g_l12, spec.g_r12);
    let plus = g * (nl + nr);
    let minus = g * (2.0 + nl + nr);
    let plus12 = gl * nl + gr * nr;
    let minus12 = gl * (1.0 + nl) + gr * (1.0 + nr);
    let a = minus * minus + 2.0 * plus * minus - minus12 * (2.0 * plus12 + minus12);
    let bias = nl - nr;
    let population = 2.0 * eps * g * (minus * g - minus12 * gl) * bias / a;
    let coherence = 2.0 * eps * g * gr * (gl - gr) * (1.0 + nr) * bias / a;
    Ok(population + coherence)
}

/// Symmetric-interference reduction `2γε(nL − nR)/(2 + 3nL + 3nR)`.
pub fn closed_form_je_r_symmetric(eps: f64, gamma: f64, temp_l: f64, temp_r: f64) -> Result<f64> {
    let nl = bose_occupation(eps, temp_l)?;
    let nr = bose_occupation(eps, temp_r)?;
    Ok(2.0 * gamma * eps * (nl - nr) / (2.0 + 3.0 * nl + 3.0 * nr))
}

fn reject_invalid(spec: &SystemSpec, mode: ValidationMode) -> Result<()> {
    let v = validate_with(spec, mode);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(v))
    }
}

/// Closed-form right-lead heat current without interference and without the
/// middle bath.
///
/// In [`ValidationMode::Strict`] this is the two-frequency expression
/// `[γL11 γR11 Γ⁻22(ε2)(nL(ε1) − nR(ε1))ε1 + γL22 γR22 Γ⁻11(ε1)(nL(ε2) − nR(ε2))ε2]/A′`
/// with `A′ = Γ⁻11(ε1)(Γ⁺22(ε2) + Γ⁻22(ε2)) + Γ⁺11(ε1)Γ⁻22(ε2)`.
///
/// In [`ValidationMode::Eps2ZeroLimit`] the spec must have `eps2 == 0` and a
/// coupled lower level. As `ε2 → 0` the lower level's rates diverge, its own
/// term vanishes, and the current tends to the single-channel value
/// `γL11 γR11 (nL − nR) ε1 / [γL11(2 + 3nL) + γR11(2 + 3nR)]`.
pub fn closed_form_jr_no_interference(spec: &SystemSpec, mode: ValidationMode) -> Result<f64> {
    if spec.g_l12 != 0.0 || spec.g_r12 != 0.0 || spec.g_m != 0.0 {
        return Err(Error::Usage(
            "no-interference closed form needs gL12 == gR12 == 0 and gM == 0".into(),
        ));
    }
    reject_invalid(spec, mode)?;
    let e1 = spec.eps1;
    let nl1 = bose_occupation(e1, spec.temp_l)?;
    let nr1 = bose_occupation(e1, spec.temp_r)?;
    let (gl11, gr11) = (spec.g_l11, spec.g_r11);
    match mode {
        ValidationMode::Eps2ZeroLimit => {
            if spec.eps2 != 0.0 || (spec.g_l22 == 0.0 && spec.g_r22 == 0.0) {
                return Err(Error::Usage(
                    "limit mode needs eps2 == 0 and a coupled lower level".into(),
                ));
            }
            let den = gl11 * (2.0 + 3.0 * nl1) + gr11 * (2.0 + 3.0 * nr1);
            Ok(gl11 * gr11 * (nl1 - nr1) * e1 / den)
        }
        ValidationMode::Strict => {
            let e2 = spec.eps2;
            let nl2 = bose_occupation(e2, spec.temp_l)?;
            let nr2 = bose_occupation(e2, spec.temp_r)?;
            let (gl22, gr22) = (spec.g_l22, spec.g_r22);
            let p11 = gl11 * nl1 + gr11 * nr1;
            let m11 = gl11 * (1.0 + nl1) + gr11 * (1.0 + nr1);
            let p22 = gl22 * nl2 + gr22 * nr2;
            let m22 = gl22 * (1.0 + nl2) + gr22 * (1.0 + nr2);
            let a = m11 * (p22 + m22) + p11 * m22;
            Ok((gl11 * gr11 * m22 * (nl1 - nr1) * e1 + gl22 * gr22 * m11 * (nl2 - nr2) * e2) / a)
        }
    }
}

/// `nL/γL11 − nL/γR11 − (nR/γL11 − nR/γR11)` at `ε1`; zero is the
/// sufficient condition for the single-channel current to be odd under
/// exchange of the lead temperatures.
pub fn single_channel_rectification_condition(spec: &SystemSpec) -> Result<f64> {
    let nl = bose_occupation(spec.eps1, spec.temp_l)?;
    let nr = bose_occupation(spec.eps1, spec.temp_r)?;
    let (a, b) = (spec.g_l11, spec.g_r11);
    Ok(nl / a - nl / b - (nr / a - nr / b))
}
