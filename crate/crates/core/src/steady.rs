// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Steady states: numeric kernel, closed forms, and time integration.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::liouvillian::{build_generator, Generator, StateVector};
use crate::model::{build_rates, Channel, Level, RateSet, SystemSpec};

/// Populations below this value set [`SteadyState::positivity_warning`].
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Required ratio between the two slowest relaxation rates.
pub const DEGENERACY_RATIO: f64 = 1e3;
/// Second-slowest rate, relative to the generator norm, below which the
/// kernel is treated as degenerate regardless of the ratio.
pub const DEGENERACY_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    NullSpace,
    Analytic,
    TimeIntegration,
}

impl SteadyMethod {
    pub fn tag(self) -> &'static str {
        match self {
            SteadyMethod::NullSpace => "null_space",
            SteadyMethod::Analytic => "analytic",
            SteadyMethod::TimeIntegration => "time_integration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub state: StateVector,
    /// `‖L·state‖∞` against the undressed generator.
    pub residual: f64,
    pub method: SteadyMethod,
    pub positivity_warning: bool,
}

impl SteadyState {
    fn new(gen: &Generator, state: StateVector, method: SteadyMethod) -> Self {
        let residual = gen
            .apply(&state)
            .0
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        let positivity_warning = state.0[..3].iter().any(|p| p.re < POSITIVITY_FLOOR);
        Self {
            state,
            residual,
            method,
            positivity_warning,
        }
    }
}

fn require_zero_field(gen: &Generator) -> Result<()> {
    if gen.chi.is_zero() {
        Ok(())
    } else {
        Err(Error::Usage(
            "steady states need a generator built at zero counting field".into(),
        ))
    }
}

/// Kernel of the undressed generator, trace-normalized.
pub fn steady_state(gen: &Generator) -> Result<SteadyState> {
    require_zero_field(gen)?;
    let (values, vectors) = linalg::eigen(&gen.m)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].re.abs().total_cmp(&values[b].re.abs()));
    let slowest = values[order[0]].re.abs();
    let next = values[order[1]].re.abs();
    let floor = DEGENERACY_FLOOR * linalg::max_abs(&gen.m);
    if next <= DEGENERACY_RATIO * slowest || next <= floor {
        return Err(Error::DegenerateSteadyState(format!(
            "two slowest relaxation rates {slowest:.3e} and {next:.3e} are not separated"
        )));
    }
    let k = order[0];
    let mut v = [C64::new(0.0, 0.0); 5];
    for (i, x) in v.iter_mut().enumerate() {
        *x = vectors[(i, k)];
    }
    let trace = v[0] + v[1] + v[2];
    if trace.norm() == 0.0 {
        return Err(Error::DegenerateSteadyState(
            "kernel vector has zero trace".into(),
        ));
    }
    for x in &mut v {
        *x /= trace;
    }
    Ok(SteadyState::new(
        gen,
        StateVector(v),
        SteadyMethod::NullSpace,
    ))
}

fn analytic(spec: &SystemSpec, state: StateVector) -> Result<SteadyState> {
    let gen = build_generator(spec)?;
    Ok(SteadyState::new(&gen, state, SteadyMethod::Analytic))
}

fn gp(r: &RateSet, c: Channel, l: Level) -> f64 {
    r.gamma_plus(c, l)
}

fn gm(r: &RateSet, c: Channel, l: Level) -> f64 {
    r.gamma_minus(c, l)
}

/// Closed-form steady state at resonance without the middle bath.
pub fn steady_state_resonant_two_bath(spec: &SystemSpec) -> Result<SteadyState> {
    if spec.eps1 != spec.eps2 || spec.g_m != 0.0 {
        return Err(Error::Usage(
            "resonant two-bath form needs eps1 == eps2 and gM == 0".into(),
        ));
    }
    let r = build_rates(spec)?;
    use Channel::*;
    let l = Level::E1;
    let (p11, m11) = (gp(&r, C11, l), gm(&r, C11, l));
    let (p22, m22) = (gp(&r, C22, l), gm(&r, C22, l));
    let (p12, m12) = (gp(&r, C12, l), gm(&r, C12, l));
    let a = m11 * (m22 + p22) + p11 * m22 - m12 * (m12 + 2.0 * p12);
    let s = m11 + m22;
    let rho11 = (s * p11 * m22 + (p22 - p11) * m12 * m12 - 2.0 * m22 * m12 * p12) / (s * a);
    let rho22 = (s * m11 * p22 + (p11 - p22) * m12 * m12 - 2.0 * m11 * m12 * p12) / (s * a);
    let rhogg = (m11 * m22 - m12 * m12) / a;
    // m12 · (2 p12/m12 − p11/m11 − p22/m22), written without dividing by m12.
    let bracket = 2.0 * p12 - m12 * (p11 / m11 + p22 / m22);
    let rho12 = m11 * m22 * bracket / (s * a);
    let z = C64::new(rho12, 0.0);
    analytic(
        spec,
        StateVector([rho11.into(), rho22.into(), rhogg.into(), z, z]),
    )
}

/// Closed-form populations without interference and without the middle bath.
pub fn steady_state_no_interference(spec: &SystemSpec) -> Result<SteadyState> {
    if spec.g_l12 != 0.0 || spec.g_r12 != 0.0 || spec.g_m != 0.0 {
        return Err(Error::Usage(
            "no-interference form needs gL12 == gR12 == 0 and gM == 0".into(),
        ));
    }
    let r = build_rates(spec)?;
    let p11 = gp(&r, Channel::C11, Level::E1);
    let m11 = gm(&r, Channel::C11, Level::E1);
    let p22 = gp(&r, Channel::C22, Level::E2);
    let m22 = gm(&r, Channel::C22, Level::E2);
    let d = m11 * (m22 + p22) + p11 * m22;
    let state = StateVector::from_populations(p11 * m22 / d, m11 * p22 / d, m11 * m22 / d);
    analytic(spec, state)
}

/// Closed-form populations with the middle bath and no interference.
///
/// The ground population uses the lower-level decay `Γ⁻11(ε1)` in its last
/// term; that is the value fixed by the rate equations.
pub fn steady_state_three_terminal(spec: &SystemSpec) -> Result<SteadyState> {
    if spec.g_l12 != 0.0 || spec.g_r12 != 0.0 {
        return Err(Error::Usage(
            "three-terminal form needs gL12 == gR12 == 0".into(),
        ));
    }
    let r = build_rates(spec)?;
    let p11 = gp(&r, Channel::C11, Level::E1);
    let m11 = gm(&r, Channel::C11, Level::E1);
    let p22 = gp(&r, Channel::C22, Level::E2);
    let m22 = gm(&r, Channel::C22, Level::E2);
    let (pm, mm) = (r.middle_gain, r.middle_loss);
    let b = (p22 + m22 + pm) * (p11 + m11 + mm) - (mm - p22) * (pm - p11);
    let rho11 = ((m22 + pm) * p11 + pm * p22) / b;
    let rho22 = ((m11 + mm) * p22 + mm * p11) / b;
    let rhogg = (m22 * m11 + m22 * mm + pm * m11) / b;
    analytic(spec, StateVector::from_populations(rho11, rho22, rhogg))
}

/// Left-hand side of the condition for a vanishing steady-state coherence.
///
/// Without the middle bath this is
/// `Σ_j Γ⁻12(εj) [Γ⁺jj(εj)/Γ⁻jj(εj) − Γ⁺12(εj)/Γ⁻12(εj)]`. With it, the
/// ratio `Γ⁺12/Γ⁻12` is scaled by `1 + Γ⁺M/Γ⁻22 + Γ⁻M/Γ⁻11` and the term
/// `(Γ⁺11 + Γ⁺22)(Γ⁻12(ε1)Γ⁺M + Γ⁻12(ε2)Γ⁻M)/(Γ⁻11 Γ⁻22)` is added. The
/// result is NaN when a diagonal decay rate vanishes.
pub fn coherence_vanishing_residual(spec: &SystemSpec) -> Result<f64> {
    let r = build_rates(spec)?;
    use Channel::*;
    use Level::*;
    let m11 = gm(&r, C11, E1);
    let m22 = gm(&r, C22, E2);
    let ratio = [gp(&r, C11, E1) / m11, gp(&r, C22, E2) / m22];
    let (pm, mm) = (r.middle_gain, r.middle_loss);
    let scale = if spec.g_m > 0.0 {
        1.0 + pm / m22 + mm / m11
    } else {
        1.0
    };
    let mut sum = 0.0;
    for (j, level) in Level::BOTH.into_iter().enumerate() {
        let m12 = gm(&r, C12, level);
        // Γ⁻12 · Γ⁺12/Γ⁻12 = Γ⁺12, also when both vanish.
        let lead = if m12 == 0.0 { 0.0 } else { m12 * ratio[j] };
        sum += lead - scale * gp(&r, C12, level);
    }
    if spec.g_m > 0.0 {
        let p_sum = gp(&r, C11, E1) + gp(&r, C22, E2);
        sum += p_sum * (gm(&r, C12, E1) * pm + gm(&r, C12, E2) * mm) / (m11 * m22);
    }
    Ok(sum)
}

/// Result of [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolution {
    pub state: StateVector,
    pub time: f64,
    /// `‖L·state‖∞` at the final time.
    pub residual: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Local error target of the adaptive integrator.
pub const EVOLVE_LOCAL_ERROR: f64 = 1e-10;
const MAX_STEPS: usize = 20_000_000;

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rhs(gen: &Generator, v: &[C64; 5]) -> [C64; 5] {
    gen.apply(&StateVector(*v)).0
}

fn norm_inf(v: &[C64; 5]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Integrates `dv/dt = L·v` from `init` until `‖dv/dt‖∞ < tol` or `t_end`.
///
/// Explicit Dormand–Prince 5(4) with per-step error control at
/// [`EVOLVE_LOCAL_ERROR`]. Running out of time is reported through
/// [`Evolution::converged`], not as an error.
pub fn evolve(gen: &Generator, init: &StateVector, t_end: f64, tol: f64) -> Result<Evolution> {
    require_zero_field(gen)?;
    if !(tol > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Usage(format!(
            "evolve needs tol > 0 and tEnd >= 0, got {tol}, {t_end}"
        )));
    }
    // Keeping h·‖L‖ ≤ 1 stays inside the stability region, so the step size
    // never oscillates on its edge once the state has relaxed.
    let norm = (0..5)
        .map(|i| (0..5).map(|j| gen.m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-300);
    let h_max = 1.0 / norm;
    let mut y = init.0;
    let mut t = 0.0;
    let mut h = (0.01 * h_max).min(t_end.max(f64::MIN_POSITIVE));
    let mut k = [[C64::new(0.0, 0.0); 5]; 7];
    k[0] = rhs(gen, &y);
    let mut steps = 0;
    loop {
        let residual = norm_inf(&k[0]);
        if residual < tol || t >= t_end || steps >= MAX_STEPS {
            return Ok(Evolution {
                state: StateVector(y),
                time: t,
                residual,
                converged: residual < tol,
                steps,
            });
        }
        h = h.min(t_end - t);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..5 {
                        ys[i] += kj[i] * (h * a);
                    }
                }
            }
            k[s] = rhs(gen, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0_f64;
        for i in 0..5 {
            let mut d5 = C64::new(0.0, 0.0);
            let mut d4 = C64::new(0.0, 0.0);
            for s in 0..7 {
                d5 += k[s][i] * B5[s];
                d4 += k[s][i] * B4[s];
            }
            y5[i] += d5 * h;
            err = err.max(((d5 - d4) * h).norm() / (1.0 + y[i].norm()));
        }
        if err <= EVOLVE_LOCAL_ERROR {
            t += h;
            y = y5;
            // First-same-as-last: the seventh stage is the derivative at y5.
            k[0] = k[6];
            steps += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            0.9 * (EVOLVE_LOCAL_ERROR / err).powf(0.2)
        };
        h = (h * factor.clamp(0.2, 5.0)).min(h_max);
    }
}

/// Horizon and tolerance of [`SteadyMethod::TimeIntegration`].
pub const RELAXATION_HORIZON: f64 = 1e7;
pub const RELAXATION_TOL: f64 = 1e-13;

/// First closed form whose preconditions hold: resonant two-bath, then
/// no interference, then three-terminal.
pub fn steady_state_analytic(spec: &SystemSpec) -> Result<SteadyState> {
    if spec.eps1 == spec.eps2 && spec.g_m == 0.0 {
        steady_state_resonant_two_bath(spec)
    } else if spec.g_l12 == 0.0 && spec.g_r12 == 0.0 {
        if spec.g_m == 0.0 {
            steady_state_no_interference(spec)
        } else {
            steady_state_three_terminal(spec)
        }
    } else {
        Err(Error::Usage(
            "no closed form applies: needs resonance without the middle bath, or no interference"
                .into(),
        ))
    }
}

/// Relaxes the ground state under the undressed generator.
pub fn steady_state_relaxed(spec: &SystemSpec) -> Result<SteadyState> {
    let gen = build_generator(spec)?;
    let out = evolve(
        &gen,
        &StateVector::ground(),
        RELAXATION_HORIZON,
        RELAXATION_TOL,
    )?;
    if !out.converged {
        return Err(Error::Domain(format!(
            "time integration reached t = {:e} with residual {:e}",
            out.time, out.residual
        )));
    }
    let trace = out.state.trace();
    let state = StateVector(out.state.0.map(|x| x / trace));
    Ok(SteadyState::new(&gen, state, SteadyMethod::TimeIntegration))
}

pub fn solve_steady(spec: &SystemSpec, method: SteadyMethod) -> Result<SteadyState> {
    match method {
        SteadyMethod::NullSpace => steady_state(&build_generator(spec)?),
        SteadyMethod::Analytic => steady_state_analytic(spec),
        SteadyMethod::TimeIntegration => steady_state_relaxed(spec),
    }
}
